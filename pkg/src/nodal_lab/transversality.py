"""Grid certification of quantitative transversality pairs.

A pair ``(delta, epsilon)`` is admissible for a field ``f`` on a window ``W``
when, for some compact ``K_W`` inside ``W``,

1. ``|f| > delta`` on ``W \\ K_W``, and
2. ``|f(z)| <= delta`` implies ``|grad f(z)| > epsilon`` for ``z`` in ``W``.

The field is known only at grid nodes, together with Lipschitz constants for
its value and its gradient.  Every point of ``W`` is within ``h sqrt(n)/2``
of a node, so node inequalities tightened by that much Lipschitz slack
transfer to the whole window.  The verdict is three-valued: certified,
refuted (an exact node violates the un-slacked inequality), or
inconclusive.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .nodal import contour_2d, components_in_ball

__all__ = [
    "GridField",
    "PairVerdict",
    "RegularPairCert",
    "check_pair",
    "pair_frontier",
    "perturbation_stability",
    "grid_field_from_function",
]

GRID_MAGIC = b"NLGF"
GRID_VERSION = 1


@dataclass
class GridField:
    """Samples of a field and its gradient on a uniform tensor grid.

    Parameters
    ----------
    axes : list of 1-D arrays
        Node coordinates per dimension, equally spaced with a common step.
    values : array, shape ``tuple(len(a) for a in axes)``
    gradients : array, shape ``values.shape + (n,)``
    lip_value : float
        Bound on ``|grad f|`` over the grid box (Lipschitz constant of f).
    lip_grad : float
        Bound on the operator norm of the Hessian (Lipschitz constant of grad f).
    window : dict
        ``{"type": "ball", "radius": r, "center": [...]}`` or
        ``{"type": "box", "bounds": [[lo, hi], ...]}`` or ``{"type": "torus"}``
        (full periodic grid of (R / 2 pi Z)^n, no boundary).
    """

    axes: list
    values: np.ndarray
    gradients: np.ndarray
    lip_value: float
    lip_grad: float
    window: dict

    def __post_init__(self):
        self.axes = [np.asarray(a, dtype=float) for a in self.axes]
        self.values = np.asarray(self.values, dtype=float)
        if self.gradients is None:
            raise ValueError("grid field needs gradient samples")
        self.gradients = np.asarray(self.gradients, dtype=float)
        shape = tuple(len(a) for a in self.axes)
        if self.values.shape != shape or self.gradients.shape != shape + (self.n,):
            raise ValueError("value/gradient arrays do not match the axes")
        steps = [np.diff(a) for a in self.axes]
        h = steps[0][0]
        for s in steps:
            if not np.allclose(s, h, rtol=1e-9, atol=0):
                raise ValueError("grid must be uniform with a common spacing")
        if not h > 0:
            raise ValueError("spacing must be positive")
        if not np.all(np.isfinite(self.gradients)):
            raise ValueError("gradient samples must be finite")
        if self.lip_value < 0 or self.lip_grad < 0:
            raise ValueError("Lipschitz bounds must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def spacing(self) -> float:
        return float(self.axes[0][1] - self.axes[0][0])

    @property
    def window_radius(self) -> float:
        """sup of |z| over the window."""
        w = self.window
        if w["type"] == "torus":
            return float(np.sqrt(self.n) * 2 * np.pi)
        if w["type"] == "ball":
            c = np.asarray(w.get("center", [0.0] * self.n), dtype=float)
            return float(np.linalg.norm(c) + w["radius"])
        b = np.asarray(w["bounds"], dtype=float)
        return float(np.sqrt(np.sum(np.max(np.abs(b), axis=1) ** 2)))

    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def signed_distance(self, pts=None) -> np.ndarray:
        """Distance to the window boundary, positive inside, negative outside."""
        if pts is None:
            pts = self.points()
        w = self.window
        if w["type"] == "torus":
            # a closed manifold has no boundary band
            return np.full(np.shape(pts)[:-1], np.inf)
        if w["type"] == "ball":
            c = np.asarray(w.get("center", [0.0] * self.n), dtype=float)
            return w["radius"] - np.sqrt(np.sum((pts - c) ** 2, axis=-1))
        b = np.asarray(w["bounds"], dtype=float)
        inside = np.minimum(pts - b[:, 0], b[:, 1] - pts)
        dmin = inside.min(axis=-1)
        out = np.sqrt(np.sum(np.maximum(-inside, 0.0) ** 2, axis=-1))
        return np.where(dmin >= 0, dmin, -out)

    def covers_window(self) -> bool:
        w = self.window
        if w["type"] == "torus":
            # periodic grid of the full torus, first node at the origin
            per = [len(a) * self.spacing for a in self.axes]
            return bool(np.allclose(per, 2 * np.pi) and all(abs(a[0]) < 1e-12 for a in self.axes))
        lo = np.array([a[0] for a in self.axes])
        hi = np.array([a[-1] for a in self.axes])
        if w["type"] == "ball":
            c = np.asarray(w.get("center", [0.0] * self.n), dtype=float)
            blo, bhi = c - w["radius"], c + w["radius"]
        else:
            b = np.asarray(w["bounds"], dtype=float)
            blo, bhi = b[:, 0], b[:, 1]
        tol = 1e-12 * max(1.0, float(np.max(np.abs(np.concatenate([lo, hi])))))
        return bool(np.all(lo <= blo + tol) and np.all(hi >= bhi - tol))

    # serialization --------------------------------------------------------
    def header(self) -> dict:
        return {
            "n": self.n,
            "shape": [len(a) for a in self.axes],
            "origin": [float(a[0]) for a in self.axes],
            "spacing": self.spacing,
            "lip_value": self.lip_value,
            "lip_grad": self.lip_grad,
            "window": self.window,
        }

    def to_bytes(self) -> bytes:
        """Flat little-endian layout, documented in docs/formats.md."""
        buf = io.BytesIO()
        buf.write(GRID_MAGIC)
        buf.write(struct.pack("<II", GRID_VERSION, self.n))
        buf.write(struct.pack("<" + "Q" * self.n, *[len(a) for a in self.axes]))
        buf.write(struct.pack("<d", self.spacing))
        buf.write(struct.pack("<" + "d" * self.n, *[float(a[0]) for a in self.axes]))
        buf.write(struct.pack("<dd", self.lip_value, self.lip_grad))
        wjson = json.dumps(self.window, sort_keys=True).encode()
        buf.write(struct.pack("<I", len(wjson)))
        buf.write(wjson)
        buf.write(self.values.astype("<f8").tobytes(order="C"))
        buf.write(self.gradients.astype("<f8").tobytes(order="C"))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridField":
        if data[:4] != GRID_MAGIC:
            raise ValueError("not a grid field file")
        off = 4
        version, n = struct.unpack_from("<II", data, off)
        off += 8
        if version != GRID_VERSION:
            raise ValueError(f"unsupported grid field version {version}")
        shape = struct.unpack_from("<" + "Q" * n, data, off)
        off += 8 * n
        (h,) = struct.unpack_from("<d", data, off)
        off += 8
        origin = struct.unpack_from("<" + "d" * n, data, off)
        off += 8 * n
        lv, lg = struct.unpack_from("<dd", data, off)
        off += 16
        (wl,) = struct.unpack_from("<I", data, off)
        off += 4
        window = json.loads(data[off:off + wl].decode())
        off += wl
        size = int(np.prod(shape))
        vals = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape)
        off += 8 * size
        grads = np.frombuffer(data, dtype="<f8", count=size * n, offset=off).reshape(tuple(shape) + (n,))
        axes = [o + h * np.arange(s) for o, s in zip(origin, shape)]
        return cls(axes, vals.copy(), grads.copy(), lv, lg, window)

    def to_json(self) -> dict:
        out = self.header()
        out["values"] = self.values.tolist()
        out["gradients"] = self.gradients.tolist()
        return out

    @classmethod
    def from_json(cls, obj) -> "GridField":
        axes = [o + obj["spacing"] * np.arange(s) for o, s in zip(obj["origin"], obj["shape"])]
        return cls(axes, np.array(obj["values"]), np.array(obj["gradients"]),
                   obj["lip_value"], obj["lip_grad"], obj["window"])


def grid_field_from_function(func, grad, axes, lip_value, lip_grad, window) -> GridField:
    """Sample ``func`` and ``grad`` (vectorized over ``(..., n)`` points) on ``axes``."""
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return GridField(axes, func(pts), grad(pts), lip_value, lip_grad, window)


@dataclass
class PairVerdict:
    status: str                 # "certified", "refuted" or "inconclusive"
    delta: float
    epsilon: float
    slack_value: float
    slack_grad: float
    margin: dict = field(default_factory=dict)
    witness: dict = None

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    def to_json(self) -> dict:
        return {"status": self.status, "delta": self.delta, "epsilon": self.epsilon,
                "slack_value": self.slack_value, "slack_grad": self.slack_grad,
                "margin": self.margin, "witness": self.witness}


@dataclass
class RegularPairCert:
    """Certified pairs for a window/field, with the field's L2 norm."""

    window_radius: float
    l2_norm: float
    pairs: list
    margin: float
    sigma_type: str
    verdicts: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"window_radius": self.window_radius, "l2_norm": self.l2_norm,
                "pairs": [list(p) for p in self.pairs], "margin": self.margin,
                "sigma_type": self.sigma_type,
                "verdicts": [v.to_json() for v in self.verdicts]}


def _witness(f: GridField, flat_index: int, reason: str) -> dict:
    idx = np.unravel_index(flat_index, f.values.shape)
    loc = [float(a[i]) for a, i in zip(f.axes, idx)]
    g = f.gradients[idx]
    return {"reason": reason, "location": loc, "value": float(f.values[idx]),
            "grad_norm": float(np.linalg.norm(g))}


def check_pair(f: GridField, delta: float, epsilon: float) -> PairVerdict:
    """Certify, refute or leave open the pair ``(delta, epsilon)`` for ``f``.

    ``K_W`` is the set of window points at distance at least ``r = h sqrt(n)/2``
    from the boundary.  Condition 1 is checked on the nodes within ``2r`` of
    the boundary (inside or outside), condition 2 on every node within ``r``
    of the window.
    """
    if f.gradients is None:
        raise ValueError("missing gradients")
    if not f.covers_window():
        raise ValueError("grid does not cover the closed window")
    r = f.spacing * math.sqrt(f.n) / 2.0
    sv = f.lip_value * r
    sg = f.lip_grad * r
    absf = np.abs(f.values).reshape(-1)
    gnorm = np.sqrt(np.sum(f.gradients ** 2, axis=-1)).reshape(-1)
    dist = f.signed_distance().reshape(-1)

    # refutations use exact node values only
    inside = dist >= 0
    bad2 = inside & (absf <= delta) & (gnorm <= epsilon)
    if bad2.any():
        k = int(np.flatnonzero(bad2)[np.argmin(gnorm[bad2])])
        return PairVerdict("refuted", delta, epsilon, sv, sg,
                           witness=_witness(f, k, "small gradient where |f| <= delta"))
    bad1 = inside & (absf + f.lip_value * dist < delta)
    if bad1.any():
        k = int(np.flatnonzero(bad1)[np.argmin(absf[bad1])])
        return PairVerdict("refuted", delta, epsilon, sv, sg,
                           witness=_witness(f, k, "|f| < delta on the window boundary"))

    band = np.abs(dist) <= 2 * r
    near = dist >= -r
    ok1 = True
    m1 = math.inf
    if band.any():
        excess1 = absf[band] - sv - delta
        m1 = float(excess1.min())
        ok1 = m1 > 0
    cond = near & (absf <= delta + sv)
    ok2 = True
    m2 = math.inf
    if cond.any():
        excess2 = gnorm[cond] - sg - epsilon
        m2 = float(excess2.min())
        ok2 = m2 > 0
    margin = {"boundary": m1, "gradient": m2}
    if ok1 and ok2:
        return PairVerdict("certified", delta, epsilon, sv, sg, margin)
    wit = None
    if not ok1:
        k = int(np.flatnonzero(band)[np.argmin(absf[band])])
        wit = _witness(f, k, "boundary value within Lipschitz slack of delta")
    else:
        kk = np.flatnonzero(cond)
        k = int(kk[np.argmin(gnorm[kk])])
        wit = _witness(f, k, "gradient within Lipschitz slack of epsilon")
    return PairVerdict("inconclusive", delta, epsilon, sv, sg, margin, wit)


def pair_frontier(f: GridField, delta_grid, iterations: int = 12):
    """Largest certified epsilon for each delta, by bisection.

    Returns a list of ``(delta, eps_max)``; ``eps_max = 0`` when no positive
    epsilon is certified at that delta.
    """
    gmax = float(np.max(np.sqrt(np.sum(f.gradients ** 2, axis=-1))))
    out = []
    for delta in delta_grid:
        lo, hi = 0.0, gmax
        if not check_pair(f, delta, hi * 2.0 ** -(iterations + 8)).certified:
            out.append((float(delta), 0.0))
            continue
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if check_pair(f, delta, mid).certified:
                lo = mid
            else:
                hi = mid
        out.append((float(delta), lo))
    return out


def _interior_loops(values, axes, window, margin=0.0) -> int:
    ct = contour_2d(values, axes, periodic=False)
    if window["type"] == "ball":
        c = window.get("center", [0.0, 0.0])
        return components_in_ball(ct, c, window["radius"] - margin)
    b = np.asarray(window["bounds"], dtype=float)
    cnt = 0
    for k in range(ct.n_components):
        if not ct.closed[k]:
            continue
        p = ct.component_points(k)
        if np.all((p > b[:, 0] + margin) & (p < b[:, 1] - margin)):
            cnt += 1
    return cnt


def perturbation_stability(f: GridField, pair, trials: int, seed: int,
                           degree: int = 2, scale: float = 1.0):
    """Compare loop counts of ``f`` and ``f + sigma`` for random small ``sigma``.

    ``sigma`` is a random trigonometric polynomial of the given degree in the
    window-normalized variable ``z / l`` (``l`` half the window radius).  Its
    coefficients are scaled so that the rigorous bounds ``sup|sigma| <= sum|a|``
    and ``sup|grad sigma| <= sum |a| |k| / l`` are at most 0.99 delta and
    0.99 epsilon, then multiplied by ``scale`` (values above 1 break the
    bounds and are allowed to change the topology).

    Returns a dict with the base count, per-trial counts and failures.
    """
    if f.n != 2:
        raise ValueError("perturbation test implemented for n = 2")
    delta, eps = pair
    ell = f.window_radius / 2.0
    ks = [(a, b) for a in range(-degree, degree + 1) for b in range(0, degree + 1)
          if (b > 0 or a >= 0)]
    K = np.array(ks, dtype=float)
    knorm = np.sqrt(np.sum(K ** 2, axis=1)) / ell
    pts = f.points()
    phase = np.tensordot(pts, K.T, axes=([-1], [0])) / ell
    cosp, sinp = np.cos(phase), np.sin(phase)
    base = _interior_loops(f.values, f.axes, f.window)
    rng = np.random.default_rng(seed)
    counts = []
    failures = []
    for t in range(trials):
        a = rng.standard_normal(len(ks))
        b = rng.standard_normal(len(ks))
        A = float(np.sum(np.abs(a) + np.abs(b)))
        B = float(np.sum((np.abs(a) + np.abs(b)) * knorm))
        s = 0.99 * min(delta / A, eps / B if B > 0 else math.inf) * scale
        sigma = s * (cosp @ a + sinp @ b)
        cnt = _interior_loops(f.values + sigma, f.axes, f.window)
        counts.append(cnt)
        if cnt != base:
            failures.append({"trial": t, "loops": cnt})
    return {"base_loops": base, "counts": counts, "failures": failures,
            "stable": not failures, "scale": scale}
