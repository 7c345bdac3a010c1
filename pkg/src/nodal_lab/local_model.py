"""Gaussian-polynomial barrier functions and their band-limited truncations.

A :class:`GaussPoly` represents ``q(x) = Q(x) exp(-|x|^2/2)`` for a sparse
polynomial ``Q``.  Its Fourier transform is known in closed form through the
Hermite polynomials ``H_k`` defined by
``H_k(xi) exp(-xi^2/2) = d^k/dxi^k exp(-xi^2/2)``, so the band-limited
truncation

    q_eta^c(x) = (2 pi)^-n  int chi_c(eta xi) F(q)(xi) exp(i <x, xi>) dxi

is a single frequency-domain quadrature with an exact integrand.  The
rescaled field ``q_{i,c}(x) = q_eta^c(eta x)`` has Fourier support in
``B(0, c)``.

Fourier convention: ``F(f)(xi) = int f(x) exp(-i <x, xi>) dx``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .logreal import LogReal

__all__ = [
    "HermitePoly",
    "hermite",
    "GaussPoly",
    "make_product_spheres_poly",
    "coefficient_sums",
    "eval_gauss_poly",
    "fourier_gauss_poly",
    "TruncationSpec",
    "BandLimitedField",
    "QuadratureError",
    "truncate",
    "prop3_bounds",
    "truncation_errors",
    "lemma6_check",
    "lemma6_bound",
    "lemma5_certify",
    "corollary4_certify",
]

TWO_PI = 2.0 * math.pi
# past this radius every Hermite-Gaussian factor of degree <= 8 is below 1e-30
FREQ_CUTOFF = 14.0


class QuadratureError(RuntimeError):
    """Quadrature refinement did not stabilize."""


# ---------------------------------------------------------------------------
# Hermite polynomials

@dataclass(frozen=True)
class HermitePoly:
    """Polynomial with ``H_k(xi) exp(-xi^2/2) = (d/dxi)^k exp(-xi^2/2)``.

    ``coeffs[m]`` is the coefficient of ``xi^m``; the leading coefficient is
    ``(-1)^k``.
    """

    k: int
    coeffs: tuple

    def __call__(self, xi):
        return np.polynomial.polynomial.polyval(np.asarray(xi, dtype=float),
                                                np.asarray(self.coeffs, dtype=float))


def _hermite_int_coeffs(k: int) -> list:
    h = [1]
    for _ in range(k):
        deriv = [m * h[m] for m in range(1, len(h))] + [0, 0]
        shifted = [0] + h
        h = [deriv[m] - shifted[m] for m in range(len(h) + 1)]
    return h


def hermite(k: int) -> HermitePoly:
    """Hermite polynomial from ``H_{k+1} = H_k' - xi H_k``, ``H_0 = 1``.

    >>> hermite(2).coeffs
    (-1, 0, 1)
    """
    if k < 0:
        raise ValueError("degree must be nonnegative")
    return HermitePoly(k, tuple(_hermite_int_coeffs(k)))


def _hermite_table(kmax: int, xi: np.ndarray) -> np.ndarray:
    """Rows ``H_k(xi) exp(-xi^2/2)`` for ``k = 0..kmax`` (stable recurrence)."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty((kmax + 1,) + xi.shape)
    g = np.exp(-0.5 * xi * xi)
    # H_{k+1} = -xi H_k - k H_{k-1}  (three-term form of the same recurrence)
    out[0] = g
    if kmax >= 1:
        out[1] = -xi * g
    for k in range(1, kmax):
        out[k + 1] = -xi * out[k] - k * out[k - 1]
    return out


# ---------------------------------------------------------------------------
# Gaussian polynomials

@dataclass
class GaussPoly:
    """``q(x) = sum_I a_I x^I exp(-|x|^2/2)`` with sparse coefficients.

    Parameters
    ----------
    n : int
        Dimension.
    coeffs : dict
        Map from exponent tuples of length ``n`` to real coefficients.
    """

    n: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for I, a in self.coeffs.items():
            I = tuple(int(v) for v in I)
            if len(I) != self.n or min(I, default=0) < 0:
                raise ValueError(f"bad exponent {I} for n={self.n}")
            if a != 0:
                clean[I] = clean.get(I, 0.0) + float(a)
        self.coeffs = clean

    @property
    def degree(self) -> int:
        return max((sum(I) for I in self.coeffs), default=0)

    def _max_exp(self) -> int:
        return max((max(I) for I in self.coeffs), default=0)

    def _powers(self, pts, kmax):
        # pw[j][m] = x_j^m
        return [[pts[..., j] ** m for m in range(kmax + 2)] for j in range(self.n)]

    def poly(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        pw = self._powers(pts, self._max_exp())
        out = np.zeros(pts.shape[:-1])
        for I, a in self.coeffs.items():
            term = a
            for j, e in enumerate(I):
                if e:
                    term = term * pw[j][e]
            out = out + term
        return out

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return self.poly(pts) * np.exp(-0.5 * np.sum(pts * pts, axis=-1))

    def gradient(self, pts) -> np.ndarray:
        """Gradient ``(dQ/dx_k - x_k Q) exp(-|x|^2/2)``, shape ``pts.shape``."""
        pts = np.asarray(pts, dtype=float)
        pw = self._powers(pts, self._max_exp())
        Q = np.zeros(pts.shape[:-1])
        dQ = [np.zeros(pts.shape[:-1]) for _ in range(self.n)]
        for I, a in self.coeffs.items():
            mono = a
            for j, e in enumerate(I):
                if e:
                    mono = mono * pw[j][e]
            Q = Q + mono
            for k, ek in enumerate(I):
                if ek == 0:
                    continue
                d = a * ek
                for j, e in enumerate(I):
                    ee = e - 1 if j == k else e
                    if ee:
                        d = d * pw[j][ee]
                dQ[k] = dQ[k] + d
        g = np.exp(-0.5 * np.sum(pts * pts, axis=-1))
        return np.stack([(dQ[k] - pts[..., k] * Q) * g for k in range(self.n)], axis=-1)

    def fourier(self, xi) -> np.ndarray:
        """Exact transform ``(2 pi)^(n/2) sum_I a_I i^|I| prod_j H_{I_j}(xi_j) e^{-xi_j^2/2}``."""
        xi = np.asarray(xi, dtype=float)
        kmax = self._max_exp()
        tabs = [_hermite_table(kmax, xi[..., j]) for j in range(self.n)]
        out = np.zeros(xi.shape[:-1], dtype=complex)
        for I, a in self.coeffs.items():
            term = a * (1j ** (sum(I) % 4))
            for j, e in enumerate(I):
                term = term * tabs[j][e]
            out = out + term
        return out * TWO_PI ** (self.n / 2)

    def to_json(self) -> dict:
        return {"n": self.n,
                "coeffs": [[list(I), a] for I, a in sorted(self.coeffs.items())]}

    @classmethod
    def from_json(cls, obj) -> "GaussPoly":
        return cls(int(obj["n"]), {tuple(I): a for I, a in obj["coeffs"]})


def eval_gauss_poly(q: GaussPoly, point):
    """``Q(point) exp(-|point|^2/2)``; accepts one point or an array of points."""
    point = np.asarray(point, dtype=float)
    if point.shape[-1] != q.n:
        raise ValueError("point dimension mismatch")
    return q(point)


def fourier_gauss_poly(q: GaussPoly, xi):
    """Exact Fourier transform of ``q`` at ``xi`` (one point or an array)."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != q.n:
        raise ValueError("frequency dimension mismatch")
    return q.fourier(xi)


def make_product_spheres_poly(n: int, i: int) -> GaussPoly:
    """``((|x|^2 - 2)^2 + |y|^2 - 1) exp(-(|x|^2 + |y|^2)/2)``, x in R^(i+1), y in R^(n-i-1).

    Expanded: ``sum x_k^4 + 2 sum_{j<k} x_j^2 x_k^2 - 4 sum x_k^2 + sum y_k^2 + 3``
    with the cross terms only among the ``x`` coordinates.  The zero set is
    a copy of ``S^i x S^(n-i-1)`` inside the ball of radius ``sqrt(5)``.
    """
    if not 0 <= i <= n - 1:
        raise ValueError(f"index i={i} outside 0..{n - 1}")
    coeffs = {}

    def e(*pairs):
        I = [0] * n
        for j, p in pairs:
            I[j] += p
        return tuple(I)

    xs = range(i + 1)
    for k in xs:
        coeffs[e((k, 4))] = 1.0
        coeffs[e((k, 2))] = -4.0
    for j, k in itertools.combinations(xs, 2):
        coeffs[e((j, 2), (k, 2))] = 2.0
    for k in range(i + 1, n):
        coeffs[e((k, 2))] = 1.0
    coeffs[e()] = 3.0
    return GaussPoly(n, coeffs)


def coefficient_sums(q: GaussPoly):
    """``(sum |a_I| sqrt(I!), sum a_I^2 I!, number of monomials)``; ``I! = prod I_j!``."""
    s1 = s2 = 0.0
    for I, a in q.coeffs.items():
        f = math.prod(math.factorial(v) for v in I)
        s1 += abs(a) * math.sqrt(f)
        s2 += a * a * f
    return s1, s2, len(q.coeffs)


# ---------------------------------------------------------------------------
# truncation

def smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


@dataclass(frozen=True)
class TruncationSpec:
    """Cutoff ``chi_c`` (1 on ``|xi| <= c/2``, 0 on ``|xi| >= c``) and scale ``eta``.

    The radial profile is ``1 - S(2|xi|/c - 1)`` on the transition shell,
    with ``S`` the quintic smoothstep, so ``chi_c`` is C^2.
    """

    c: float
    eta: float

    def __post_init__(self):
        if not (self.c > 0 and self.eta > 0):
            raise ValueError("c and eta must be positive")

    @property
    def ratio(self) -> float:
        """``c / (2 eta)``: the radius where the truncation starts to act."""
        return self.c / (2.0 * self.eta)

    def chi(self, xi_norm):
        """``chi_c(xi)`` as a function of ``|xi|``."""
        return 1.0 - smoothstep5(2.0 * np.asarray(xi_norm, dtype=float) / self.c - 1.0)

    def multiplier(self, xi_norm):
        """``chi_c(eta xi)`` as a function of ``|xi|``."""
        return self.chi(self.eta * np.asarray(xi_norm, dtype=float))


def _panel_breaks(spec: TruncationSpec, extent: float):
    cuts = {-extent, 0.0, extent}
    for b in (spec.c / (2 * spec.eta), spec.c / spec.eta):
        if b < extent:
            cuts.update((-b, b))
    return sorted(cuts)


def _gl_panels(breaks, m):
    x, w = np.polynomial.legendre.leggauss(m)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * x)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


class BandLimitedField:
    """Evaluator for ``q_eta^c`` and its rescaling ``q_{i,c}(x) = q_eta^c(eta x)``.

    Built by :func:`truncate`.  The frequency integral is a tensor
    Gauss-Legendre rule on ``[-B, B]^n`` with ``B = min(c/eta, 14)``, panel
    edges at the cutoff radii ``c/(2 eta)`` and ``c/eta``.  Quadrature
    weights and the (real-symmetrized) integrand are stored once; evaluation
    is a weighted exponential sum.
    """

    def __init__(self, q: GaussPoly, spec: TruncationSpec, m: int):
        self.q = q
        self.spec = spec
        self.n = q.n
        self.m = m
        extent = min(spec.c / spec.eta, FREQ_CUTOFF)
        self.nodes1d, self.weights1d = _gl_panels(_panel_breaks(spec, extent), m)
        grids = np.meshgrid(*([self.nodes1d] * self.n), indexing="ij")
        xi = np.stack(grids, axis=-1)
        wt = np.ones(xi.shape[:-1])
        for j in range(self.n):
            shape = [1] * self.n
            shape[j] = -1
            wt = wt * self.weights1d.reshape(shape)
        radius = np.sqrt(np.sum(xi * xi, axis=-1))
        mult = spec.multiplier(radius)
        active = mult > 0
        assert np.all(radius[active] <= spec.c / spec.eta * (1 + 1e-12)), \
            "quadrature node outside the frequency ball"
        self.xi = xi
        self.weights = wt
        # complex amplitude per node, including (2 pi)^-n
        self.amp = wt * mult * q.fourier(xi) / TWO_PI ** self.n

    # pointwise -----------------------------------------------------------
    def _sum(self, y, extra=None):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        xi = self.xi.reshape(-1, self.n)
        amp = self.amp.reshape(-1)
        if extra is not None:
            amp = amp * extra.reshape(-1)
        out = np.empty(len(y), dtype=complex)
        step = max(1, 2_000_000 // max(len(amp), 1))
        for s in range(0, len(y), step):
            phase = np.exp(1j * (y[s:s + step] @ xi.T))
            out[s:s + step] = phase @ amp
        return out

    def eval_scaled_complex(self, y):
        return self._sum(y)

    def eval_scaled(self, y):
        """``q_eta^c(y)`` at points ``y`` of shape ``(P, n)``."""
        return self._sum(y).real

    def grad_scaled(self, y):
        return np.stack([self._sum(y, 1j * self.xi[..., k]).real
                         for k in range(self.n)], axis=-1)

    def __call__(self, x):
        """``q_{i,c}(x) = q_eta^c(eta x)``."""
        return self.eval_scaled(self.spec.eta * np.atleast_2d(x))

    def gradient(self, x):
        return self.spec.eta * self.grad_scaled(self.spec.eta * np.atleast_2d(x))

    # tensor grids --------------------------------------------------------
    def grid_scaled(self, axes, with_gradient=True):
        """Values (and gradients) of ``q_eta^c`` on the tensor grid ``axes``.

        Uses the separable structure of ``exp(i <y, xi>)``; supported for
        ``n <= 2``.
        """
        if self.n > 2:
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            flat = mesh.reshape(-1, self.n)
            vals = self.eval_scaled(flat).reshape(mesh.shape[:-1])
            grads = self.grad_scaled(flat).reshape(mesh.shape) if with_gradient else None
            return vals, grads
        E = [np.exp(1j * np.outer(np.asarray(a, dtype=float), self.nodes1d)) for a in axes]
        if self.n == 1:
            def apply(A):
                return (E[0] @ A).real
        else:
            def apply(A):
                return ((E[0] @ A) @ E[1].T).real
        vals = apply(self.amp)
        if not with_gradient:
            return vals, None
        grads = np.stack([apply(self.amp * 1j * self.xi[..., k])
                          for k in range(self.n)], axis=-1)
        return vals, grads

    def grid(self, axes, with_gradient=True):
        """Values and gradients of ``q_{i,c}`` on a tensor grid in x-coordinates."""
        eta = self.spec.eta
        vals, grads = self.grid_scaled([eta * np.asarray(a) for a in axes], with_gradient)
        if grads is not None:
            grads = grads * eta
        return vals, grads

    # norms and derivative bounds -----------------------------------------
    def l2_norm_scaled(self) -> float:
        """``||q_eta^c||_{L^2}`` via Plancherel on the quadrature nodes."""
        # amp carries one weight and (2 pi)^-n; the squared integrand needs
        # one weight and (2 pi)^-n in total
        val = np.sum(np.abs(self.amp) ** 2 / self.weights) * TWO_PI ** self.n
        return float(math.sqrt(val))

    def l2_norm(self) -> float:
        """``||q_{i,c}||_{L^2} = eta^(-n/2) ||q_eta^c||_{L^2}``."""
        return self.l2_norm_scaled() / self.spec.eta ** (self.n / 2)

    def derivative_bounds_scaled(self, safety: float = 1.05):
        """Global bounds ``(sup|grad|, sup||Hess||)`` of ``q_eta^c``.

        Both follow from ``|d^k f| <= (2 pi)^-n int |xi|^k |F f|``; the
        integrals are evaluated with the stored quadrature and inflated by
        ``safety`` to absorb its error.
        """
        r = np.sqrt(np.sum(self.xi ** 2, axis=-1))
        a = np.abs(self.amp)
        return safety * float(np.sum(r * a)), safety * float(np.sum(r * r * a))

    def derivative_bounds(self, safety: float = 1.05):
        """Same bounds for ``q_{i,c}`` in x-coordinates (factors eta, eta^2)."""
        g, h = self.derivative_bounds_scaled(safety)
        eta = self.spec.eta
        return g * eta, h * eta * eta


def truncate(q: GaussPoly, spec: TruncationSpec, tol: float = 1e-8,
             m0: int = 24, m_max: int = 384, probes=None) -> BandLimitedField:
    """Build the band-limited evaluator, doubling nodes until stable.

    Nodes per panel start at ``m0`` and double until values at the probe
    points (default: the origin and a few fixed points in ``[-3, 3]^n``)
    change by at most ``tol``.  The imaginary part at the probes has to be
    below ``1e-10``.

    Raises
    ------
    QuadratureError
        If ``m_max`` nodes per panel are reached without agreement, or the
        imaginary part is not negligible.
    """
    if probes is None:
        rng = np.random.default_rng(12345)
        probes = np.vstack([np.zeros(q.n), rng.uniform(-3, 3, size=(5, q.n))])
    probes = np.atleast_2d(probes)
    m = m0
    prev = BandLimitedField(q, spec, m)
    prev_vals = prev.eval_scaled_complex(probes)
    while True:
        m *= 2
        if m > m_max:
            raise QuadratureError(f"no agreement to {tol} with {m // 2} nodes per panel")
        cur = BandLimitedField(q, spec, m)
        vals = cur.eval_scaled_complex(probes)
        if np.max(np.abs(vals.real - prev_vals.real)) <= tol:
            if np.max(np.abs(vals.imag)) > 1e-10:
                raise QuadratureError("imaginary part of a real field exceeds 1e-10")
            cur.probe_change = float(np.max(np.abs(vals.real - prev_vals.real)))
            return cur
        prev, prev_vals = cur, vals


# ---------------------------------------------------------------------------
# closed-form truncation bounds and their empirical counterpart

def prop3_bounds(q: GaussPoly, c: float, eta: float):
    """Closed-form bounds on the truncation error of ``q_eta^c``.

    With ``s = c/(2 eta)``, ``A = sum |a_I| sqrt(I!)`` and ``B = sum a_I^2 I!``:

    * sup norm: ``sqrt(floor(n/2+1)) s^((n-2)/2) exp(-s^2/4) A``
    * each partial derivative: ``sqrt(floor(n/2+3)) s^(n/2) exp(-s^2/4) A``
    * L2 norm: ``sqrt( (2 pi)^(n/2) N(Q) B exp(-s^2/2) )``

    Returned as LogReals since they underflow doubles for large ``s``.

    Raises
    ------
    ValueError
        When ``c/(2 eta) < 1``.
    """
    n = q.n
    s = c / (2.0 * eta)
    if s < 1:
        raise ValueError("the bounds need c/(2 eta) >= 1")
    A, B, N = coefficient_sums(q)
    if A == 0:
        return LogReal.zero(), LogReal.zero(), LogReal.zero()
    la = math.log(A)
    sup = 0.5 * math.log(n // 2 + 1) + 0.5 * (n - 2) * math.log(s) - 0.25 * s * s + la
    grad = 0.5 * math.log((n + 6) // 2) + 0.5 * n * math.log(s) - 0.25 * s * s + la
    l2sq = 0.5 * n * math.log(TWO_PI) + math.log(N) + math.log(B) - 0.5 * s * s
    return LogReal(sup), LogReal(grad), LogReal(0.5 * l2sq)


def _complement_rule_1d(s0, spec, m):
    """Radial/half-line nodes on ``[s0, s0 + span]`` and weights, with the
    Gaussian factor ``exp(-(r^2 - s0^2)/2)`` folded into the weights."""
    span = math.sqrt(s0 * s0 + 100.0) - s0
    hi = s0 + span
    breaks = [s0, hi]
    if spec.c / spec.eta < hi:
        breaks = [s0, spec.c / spec.eta, hi]
    return _gl_panels(breaks, m)


def truncation_errors(q: GaussPoly, spec: TruncationSpec, xs, m: int = 48,
                      n_angle: int | None = None):
    """Empirical truncation errors of ``q_eta^c`` computed from the complement.

    ``q_eta^c - q = -(2 pi)^-n int (1 - chi_c(eta xi)) F(q)(xi) exp(i<x,xi>) dxi``
    and the integrand lives on ``|xi| >= s0 = c/(2 eta)``.  The integral is
    taken over that shell directly (half-lines in n = 1, polar coordinates in
    n = 2), with ``exp(-s0^2/2)`` factored out, so errors far below double
    precision are still resolved.

    Parameters
    ----------
    xs : sequence of arrays
        Reference grid axes (one per dimension) in the unscaled variable.

    Returns
    -------
    dict
        ``sup``, ``grad`` (max over coordinates of the sup of the partial
        derivative error) and ``l2`` as LogReals.
    """
    n = q.n
    if n not in (1, 2):
        raise ValueError("complement quadrature implemented for n = 1, 2")
    s0 = spec.ratio
    r, w = _complement_rule_1d(s0, spec, m)
    one_minus = 1.0 - spec.multiplier(r)
    # strip exp(-r^2/2) from F and reinsert it relative to s0
    gauss_rel = np.exp(-0.5 * (r - s0) * (r + s0))
    mesh = np.stack(np.meshgrid(*[np.asarray(a, float) for a in xs], indexing="ij"), axis=-1)
    pts = mesh.reshape(-1, n)
    if n == 1:
        xi = np.concatenate([r, -r])[:, None]
        wt = np.concatenate([w * one_minus * gauss_rel] * 2)
    else:
        if n_angle is None:
            xmax = float(np.max(np.sqrt(np.sum(pts ** 2, axis=1)))) if len(pts) else 0.0
            n_angle = int(2 ** math.ceil(math.log2(max(64, 2.5 * xmax * r.max() + 64))))
        phi = TWO_PI * np.arange(n_angle) / n_angle
        R, P = np.meshgrid(r, phi, indexing="ij")
        xi = np.stack([R * np.cos(P), R * np.sin(P)], axis=-1).reshape(-1, 2)
        wt = (np.outer(w * one_minus * gauss_rel * r, np.full(n_angle, TWO_PI / n_angle))).reshape(-1)
    # F(q)(xi) exp(+|xi|^2/2): recompute through a Gaussian-free table
    Fq = _fourier_without_gauss(q, xi)
    amp = wt * Fq / TWO_PI ** n
    sup = 0.0
    gsup = np.zeros(n)
    step = max(1, 4_000_000 // len(amp))
    for s in range(0, len(pts), step):
        ph = np.exp(1j * (pts[s:s + step] @ xi.T))
        sup = max(sup, float(np.max(np.abs(ph @ amp))))
        for k in range(n):
            gsup[k] = max(gsup[k], float(np.max(np.abs(ph @ (amp * 1j * xi[:, k])))))
    # Plancherel: ||err||^2 = (2 pi)^-n int (1-chi)^2 |F q|^2
    if n == 1:
        wt2 = np.concatenate([w * one_minus ** 2 * gauss_rel ** 2] * 2)
    else:
        wt2 = (np.outer(w * one_minus ** 2 * gauss_rel ** 2 * r,
                        np.full(n_angle, TWO_PI / n_angle))).reshape(-1)
    l2sq = float(np.sum(wt2 * np.abs(Fq) ** 2)) / TWO_PI ** n
    shift = -0.5 * s0 * s0
    return {
        "sup": LogReal(math.log(sup) + shift) if sup > 0 else LogReal.zero(),
        "grad": LogReal(math.log(gsup.max()) + shift) if gsup.max() > 0 else LogReal.zero(),
        "l2": LogReal(0.5 * math.log(l2sq) + shift) if l2sq > 0 else LogReal.zero(),
    }


def _fourier_without_gauss(q: GaussPoly, xi):
    """``F(q)(xi) exp(|xi|^2/2)``: the Hermite-polynomial part only."""
    n = q.n
    kmax = q._max_exp()
    out = np.zeros(xi.shape[:-1], dtype=complex)
    polys = [np.asarray(hermite(k).coeffs, dtype=float) for k in range(kmax + 1)]
    tabs = [[np.polynomial.polynomial.polyval(xi[..., j], polys[k]) for k in range(kmax + 1)]
            for j in range(n)]
    for I, a in q.coeffs.items():
        term = a * (1j ** (sum(I) % 4))
        for j, e in enumerate(I):
            term = term * tabs[j][e]
        out = out + term
    return out * TWO_PI ** (n / 2)


# ---------------------------------------------------------------------------
# L2 norm of the product-of-spheres barrier

def lemma6_bound(n: int) -> float:
    """``sqrt(3/2) pi^(n/4) (n+6)^2``."""
    return math.sqrt(1.5) * math.pi ** (n / 4) * (n + 6) ** 2


def _radial_rule(dim: int, m: int):
    """Nodes t and weights for ``int_{R^dim} g(|x|^2) exp(-|x|^2) dx``.

    In ``t = |x|^2`` this is ``(1/2) |S^(dim-1)| int g(t) t^((dim-2)/2) e^-t dt``,
    a generalized Gauss-Laguerre rule.  ``dim = 0`` is the point mass at 0.
    """
    from scipy.special import roots_genlaguerre

    if dim == 0:
        return np.zeros(1), np.ones(1)
    t, w = roots_genlaguerre(m, (dim - 2) / 2.0)
    sphere = 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)
    return t, 0.5 * sphere * w


def lemma6_check(n: int, i: int, m: int = 12):
    """Quadrature value of ``||q_i||_{L^2(R^n)}`` and the closed-form bound.

    The squared integrand ``(a^2 - 4a + 3 + b)^2 exp(-a - b)`` with
    ``a = |x|^2``, ``b = |y|^2`` is a polynomial in ``(a, b)`` against
    Gamma-type weights, so a tensor of two Gauss-Laguerre rules with ``m``
    nodes is exact once ``m >= 5``.

    Raises
    ------
    AssertionError
        If the quadrature value exceeds the bound.
    """
    if not 1 <= n <= 6 or not 0 <= i <= n - 1:
        raise ValueError("need 1 <= n <= 6 and 0 <= i < n")
    ta, wa = _radial_rule(i + 1, m)
    tb, wb = _radial_rule(n - i - 1, m)
    A, B = np.meshgrid(ta, tb, indexing="ij")
    integrand = (A * A - 4 * A + 3 + B) ** 2
    val = float(np.sqrt(np.einsum("i,ij,j->", wa, integrand, wb)))
    bound = lemma6_bound(n)
    assert val <= bound, f"L2 norm {val} above bound {bound}"
    return val, bound


# ---------------------------------------------------------------------------
# grid certificates for the product-of-spheres barrier

E52 = math.exp(-2.5)


def sigma_tag(n: int, i: int) -> str:
    return f"S{i}xS{n - i - 1}"


def _window_axes(radius: float, grid: int):
    # two extra cells beyond the window so the boundary band has nodes outside
    h = 2.0 * radius / (grid - 5)
    half = h * (grid - 1) / 2.0
    ax = np.linspace(-half, half, grid)
    return [ax, ax]


def _loop_report(values, axes, radius):
    from .nodal import contour_2d

    ct = contour_2d(values, axes, periodic=False)
    pts_r = np.sqrt(np.sum(ct.points ** 2, axis=1)) if len(ct.points) else np.zeros(0)
    inside = []
    crossing = 0
    for k in range(ct.n_components):
        r = pts_r[ct.labels == k]
        if ct.closed[k] and np.all(r < radius):
            inside.append(float(r.max()))
        elif np.any(r < radius):
            crossing += 1
    return {"loops_inside": len(inside), "components_meeting_window": len(inside) + crossing,
            "max_loop_radius": max(inside, default=0.0), "n_saddles": ct.n_saddles}, ct


def lemma5_certify(n: int, i: int, delta: float = 0.5, grid: int = 1024):
    """Grid certificate that ``(delta e^{-5/2}, (2 - delta) e^{-5/2}/2)`` is admissible.

    The field is the exact barrier ``q_i`` on the ball ``|z| <= sqrt(5)``.
    Lipschitz constants come from ``(2 pi)^-n int |xi|^k |F q_i|``.
    Implemented for ``n = 2`` (grid certificate plus loop count).

    Returns
    -------
    cert : RegularPairCert
    report : dict
        Verdict details, minimum of ``|q_i|`` on the boundary circle and the
        number of loops inside the window.
    """
    from .transversality import GridField, RegularPairCert, check_pair

    if not 0 < delta <= 0.5:
        raise ValueError("need 0 < delta <= 1/2")
    if n != 2:
        raise ValueError("grid certificate implemented for n = 2")
    q = make_product_spheres_poly(n, i)
    radius = math.sqrt(5.0)
    pair = (delta * E52, 0.5 * E52 * (2.0 - delta))
    wide = truncate(q, TruncationSpec(1.0, 1.0 / 64.0))
    lip_v, lip_g = wide.derivative_bounds_scaled()
    axes = _window_axes(radius, grid)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    f = GridField(axes, q(pts), q.gradient(pts), lip_v, lip_g,
                  {"type": "ball", "radius": radius, "center": [0.0, 0.0]})
    verdict = check_pair(f, *pair)
    phi = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
    circle = radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    loops, _ = _loop_report(f.values, axes, radius)
    l2, _ = lemma6_check(n, i)
    cert = RegularPairCert(radius, l2, [pair] if verdict.certified else [],
                           min(verdict.slack_value, verdict.slack_grad),
                           sigma_tag(n, i), [verdict])
    report = {"pair": list(pair), "verdict": verdict.to_json(),
              "boundary_min_abs": float(np.min(np.abs(q(circle)))),
              "grid": grid, "spacing": f.spacing, **loops}
    return cert, report


def corollary4_certify(n: int, i: int, c: float, eta: float, grid: int = 1024,
                       return_field: bool = False):
    """Certificate for the band-limited barrier ``q_{i,c}`` on ``W_eta``.

    ``W_eta = {|x|^2 <= 5/eta^2}``.  Checks the pair
    ``(e^{-5/2}/4, eta e^{-5/2}/sqrt(2))`` on a grid over ``W_eta``, counts
    the closed nodal loops strictly inside ``W_eta`` (two circles for
    ``n = 2``), and bounds the L2 norm by ``(3/2) pi^(n/4) (n+6)^2 / eta^(n/2)``.

    Raises
    ------
    ValueError
        If ``eta > c/(48 n)`` or ``n != 2``.
    """
    from .transversality import GridField, RegularPairCert, check_pair

    if not 0 < eta <= c / (48.0 * n):
        raise ValueError(f"eta={eta} exceeds c/(48 n)={c / (48.0 * n)}")
    if n != 2:
        raise ValueError("grid certificate implemented for n = 2")
    q = make_product_spheres_poly(n, i)
    spec = TruncationSpec(c, eta)
    fld = truncate(q, spec)
    radius = math.sqrt(5.0) / eta
    pair = (0.25 * E52, eta * E52 / math.sqrt(2.0))
    axes = _window_axes(radius, grid)
    vals, grads = fld.grid(axes)
    lip_v, lip_g = fld.derivative_bounds()
    f = GridField(axes, vals, grads, lip_v, lip_g,
                  {"type": "ball", "radius": radius, "center": [0.0, 0.0]})
    verdict = check_pair(f, *pair)
    loops, ct = _loop_report(vals, axes, radius)
    l2 = fld.l2_norm()
    l2_bound = 1.5 * math.pi ** (n / 4) * (n + 6) ** 2 / eta ** (n / 2)
    expected_loops = 2 if n == 2 else None
    topology_ok = loops["loops_inside"] == expected_loops and \
        loops["components_meeting_window"] == expected_loops
    cert = RegularPairCert(radius, l2, [pair] if verdict.certified else [],
                           min(verdict.slack_value, verdict.slack_grad),
                           sigma_tag(n, i), [verdict])
    report = {"pair": list(pair), "verdict": verdict.to_json(), "grid": grid,
              "spacing": f.spacing, "l2_norm": l2, "l2_bound": l2_bound,
              "l2_ok": l2 <= l2_bound, "topology_ok": topology_ok,
              "quadrature_nodes_per_panel": fld.m, **loops}
    if return_field:
        return cert, report, f, ct
    return cert, report
