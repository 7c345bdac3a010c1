"""Symbol bodies K in R^n and the monomial moment integrals over them.

A body is described radially: a ball, a body sandwiched between two balls
(``annulus_bounded``), or a body given only by a membership test
(``explicit_sampler``).  Non-ball bodies carry a concrete shape (ball,
axis-aligned ellipsoid or cube) used for sampling and for the volume.
Moments over balls are exact; over anything else they are Monte Carlo.
"""

from __future__ import annotations

import itertools
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .logreal import LogReal

__all__ = [
    "SymbolBody",
    "ball",
    "ball_moment",
    "ball_volume",
    "log_ball_volume",
    "moment_mc",
    "symbol_extents",
    "power_moment",
    "normalize_index",
]

KINDS = ("ball", "annulus_bounded", "explicit_sampler", "empty")
SHAPES = ("ball", "ellipsoid", "cube")

MC_CHUNK = 1 << 16
MIN_ACCEPTANCE = 1e-4


def log_ball_volume(n: int, r: float = 1.0) -> float:
    """log Vol(B(0, r)) in R^n."""
    return 0.5 * n * math.log(math.pi) - math.lgamma(n / 2 + 1) + n * math.log(r)


def ball_volume(n: int, r: float = 1.0) -> float:
    return math.exp(log_ball_volume(n, r))


# ---------------------------------------------------------------------------
# concrete shapes used by non-ball bodies

def _shape_check(shape: dict, n: int):
    kind = shape.get("shape")
    if kind not in SHAPES:
        raise ValueError(f"unknown sampler shape {kind!r}")
    if kind == "ball":
        if not shape["radius"] > 0:
            raise ValueError("ball radius must be positive")
    elif kind == "ellipsoid":
        axes = shape["axes"]
        if len(axes) != n or min(axes) <= 0:
            raise ValueError("ellipsoid needs n positive semi-axes")
    else:
        if not shape["half_width"] > 0:
            raise ValueError("cube half width must be positive")


def _shape_log_volume(shape: dict, n: int) -> float:
    kind = shape["shape"]
    if kind == "ball":
        return log_ball_volume(n, shape["radius"])
    if kind == "ellipsoid":
        return log_ball_volume(n) + sum(math.log(a) for a in shape["axes"])
    return n * math.log(2 * shape["half_width"])


def _shape_radii(shape: dict, n: int):
    """(inner, outer) radii: B(inner) is inside the shape, shape inside B(outer)."""
    kind = shape["shape"]
    if kind == "ball":
        return shape["radius"], shape["radius"]
    if kind == "ellipsoid":
        return min(shape["axes"]), max(shape["axes"])
    h = shape["half_width"]
    return h, h * math.sqrt(n)


def _shape_contains(shape: dict, pts: np.ndarray) -> np.ndarray:
    kind = shape["shape"]
    if kind == "ball":
        return np.einsum("ij,ij->i", pts, pts) <= shape["radius"] ** 2
    if kind == "ellipsoid":
        a = np.asarray(shape["axes"], dtype=float)
        return np.sum((pts / a) ** 2, axis=1) <= 1.0
    return np.max(np.abs(pts), axis=1) <= shape["half_width"]


@dataclass(frozen=True, eq=True)
class SymbolBody:
    """A compact body K, symmetric about the origin.

    Parameters
    ----------
    n : int
        Ambient dimension.
    kind : str
        ``"ball"`` (params ``radius``), ``"annulus_bounded"`` (params
        ``c_inner``, ``d_outer``, ``sampler``), ``"explicit_sampler"``
        (params ``sampler``) or ``"empty"`` (the degenerate body of volume
        zero; params ignored).
    params : dict
        Kind-specific parameters; a ``sampler`` is a shape dictionary such as
        ``{"shape": "ellipsoid", "axes": [1.0, 2.0]}``.
    """

    n: int
    kind: str
    params: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("dimension must be a positive integer")
        if self.kind not in KINDS:
            raise ValueError(f"unknown body kind {self.kind!r}")
        p = self.params
        if self.kind == "ball":
            if not p.get("radius", 0) > 0:
                raise ValueError("ball radius must be positive")
        elif self.kind == "annulus_bounded":
            c, d = p["c_inner"], p["d_outer"]
            if not 0 < c <= d:
                raise ValueError("need 0 < c_inner <= d_outer")
            _shape_check(p["sampler"], self.n)
            lo, hi = _shape_radii(p["sampler"], self.n)
            if lo < c * (1 - 1e-12) or hi > d * (1 + 1e-12):
                raise ValueError("sampler shape is not sandwiched between "
                                 "B(0, c_inner) and B(0, d_outer)")
        elif self.kind == "explicit_sampler":
            _shape_check(p["sampler"], self.n)

    # basic geometry -------------------------------------------------------
    @property
    def degenerate(self) -> bool:
        return self.kind == "empty"

    @property
    def d(self) -> float:
        """sup of ||xi|| over K."""
        if self.kind == "ball":
            return float(self.params["radius"])
        if self.kind == "annulus_bounded":
            return float(self.params["d_outer"])
        if self.kind == "explicit_sampler":
            return float(_shape_radii(self.params["sampler"], self.n)[1])
        return 0.0

    @property
    def nu(self) -> LogReal:
        if self.kind == "ball":
            return LogReal(log_ball_volume(self.n, self.params["radius"]))
        if self.kind == "empty":
            return LogReal.zero()
        return LogReal(_shape_log_volume(self.params["sampler"], self.n))

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.n:
            raise ValueError("point dimension mismatch")
        if self.kind == "ball":
            return _shape_contains({"shape": "ball", **self.params}, pts)
        if self.kind == "empty":
            return np.zeros(len(pts), dtype=bool)
        return _shape_contains(self.params["sampler"], pts)

    # serialization --------------------------------------------------------
    def to_json(self) -> dict:
        return {"n": self.n, "kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj) -> "SymbolBody":
        return cls(int(obj["n"]), obj["kind"], dict(obj.get("params", {})))


def ball(n: int, radius: float = 1.0) -> SymbolBody:
    return SymbolBody(n, "ball", {"radius": float(radius)})


def symbol_extents(body: SymbolBody):
    """Return ``(nu, d)``: the volume of K as a LogReal and sup ||xi|| on K."""
    nu, d = body.nu, body.d
    if not body.degenerate:
        # a ball of the same volume has to fit in B(0, d)
        r_eq = math.exp((float(nu.log) - log_ball_volume(body.n)) / body.n)
        assert d >= r_eq * (1 - 1e-12), "body volume exceeds its bounding ball"
    return nu, d


# ---------------------------------------------------------------------------
# moments

def normalize_index(idx, n: int) -> tuple:
    """Validate a multi-index of coordinates in ``1..n`` and return it as a tuple."""
    idx = tuple(int(j) for j in idx)
    for j in idx:
        if not 1 <= j <= n:
            raise ValueError(f"coordinate index {j} outside 1..{n}")
    return idx


def _half_exponents(idx, n):
    cnt = Counter(idx)
    return [cnt.get(j, 0) for j in range(1, n + 1)]


def log_ball_monomial(n: int, r: float, a) -> float:
    """log of the integral over B(0, r) of prod_j xi_j^(2 a_j)."""
    s = sum(a)
    log_sphere = math.log(2.0) + sum(math.lgamma(aj + 0.5) for aj in a) \
        - math.lgamma(s + n / 2)
    m = n + 2 * s
    return log_sphere + m * math.log(r) - math.log(m)


def ball_moment(n: int, r: float, idx=()) -> LogReal:
    """Integral over B(0, r) in R^n of prod_k xi_{j_k}^2.

    The multi-index is collapsed to per-coordinate exponents and the
    integral split into a radial part and a spherical monomial integral
    ``2 prod Gamma(a_j + 1/2) / Gamma(|a| + n/2)``.

    Examples
    --------
    >>> round(float(ball_moment(2, 1.0, (1,))), 12) == round(math.pi / 4, 12)
    True
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    if not r > 0:
        raise ValueError("radius must be positive")
    idx = normalize_index(idx, n)
    return LogReal(log_ball_monomial(n, r, _half_exponents(idx, n)))


def power_moment(n: int, r: float, i: int, j=None) -> LogReal:
    """Sum over ordered tuples (j_1..j_i) of ball moments, optionally times xi_j^2.

    Ordered tuples with repetition are grouped by their multiset, each
    multiset weighted by its multinomial count.  The result equals the
    integral of ``||xi||^(2i)`` (times ``xi_j^2``) over the ball.
    """
    extra = () if j is None else (j,)
    total = LogReal.zero()
    for combo in itertools.combinations_with_replacement(range(1, n + 1), i):
        counts = Counter(combo).values()
        log_mult = math.lgamma(i + 1) - sum(math.lgamma(c + 1) for c in counts)
        total = total + LogReal(log_mult) * ball_moment(n, r, combo + extra)
    return total


def _chunk_integrand(body, d, g, nsamp, seed, chunk):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
    pts = rng.uniform(-d, d, size=(nsamp, body.n))
    inside = body.contains(pts)
    vals = np.where(inside[None, :], g(pts), 0.0)
    return vals.sum(axis=1), (vals ** 2).sum(axis=1), int(inside.sum())


def mc_integrate(body: SymbolBody, g, samples: int, seed: int, threads=None):
    """Monte Carlo integrals over K of the rows of ``g(points)``.

    ``g`` maps an ``(N, n)`` array to an ``(m, N)`` array.  Samples are drawn
    uniformly in the bounding box ``[-d, d]^n`` in chunks of fixed size, each
    chunk with its own seed derived from ``(seed, chunk index)``; the result
    does not depend on ``threads``.

    Returns ``(estimates, stderrs, acceptance)`` as arrays of length m.
    """
    if body.degenerate:
        raise ValueError("degenerate body has no sampler")
    d = body.d
    sizes = [MC_CHUNK] * (samples // MC_CHUNK)
    if samples % MC_CHUNK:
        sizes.append(samples % MC_CHUNK)
    if threads is None:
        threads = int(os.environ.get("NODAL_LAB_THREADS", "1"))
    jobs = [(body, d, g, sz, seed, c) for c, sz in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda a: _chunk_integrand(*a), jobs))
    else:
        parts = [_chunk_integrand(*a) for a in jobs]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    hits = sum(p[2] for p in parts)
    acc = hits / samples
    if acc < MIN_ACCEPTANCE:
        raise ValueError(f"rejection sampler acceptance {acc:.2e} too low "
                         "(degenerate body)")
    box = (2 * d) ** body.n
    mean = s1 / samples
    var = np.maximum(s2 / samples - mean ** 2, 0.0)
    return box * mean, box * np.sqrt(var / (samples - 1)), acc


def moment_mc(body: SymbolBody, idx, samples: int, seed: int, threads=None):
    """Monte Carlo estimate of the integral over K of prod_k xi_{j_k}^2.

    Returns ``(estimate, stderr)`` with the estimate as a LogReal.
    """
    idx = normalize_index(idx, body.n)
    cols = np.array(idx, dtype=int) - 1

    def g(pts):
        return np.prod(pts[:, cols] ** 2, axis=1)[None, :]

    est, err, _ = mc_integrate(body, g, samples, seed, threads)
    return LogReal.from_value(float(est[0])), float(err[0])
