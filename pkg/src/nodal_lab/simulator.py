"""Gaussian band-limited sections on the flat torus (R / 2 pi Z)^n, n = 1, 2.

The space U_L is spanned by the real orthonormal basis

    (2 pi)^(-n/2),   sqrt(2) (2 pi)^(-n/2) cos<k, x>,   sqrt(2) (2 pi)^(-n/2) sin<k, x>

over half-modes k (``|k|^2 <= L``, first nonzero coordinate positive).
A random section has i.i.d. N(0, 1/2) coordinates in this basis, matching
the density ``pi^(-N/2) exp(-|s|^2)``.

Seeding: trial ``t`` of a run with master seed ``s`` draws from
``SeedSequence(s, spawn_key=(t,))``; a redraw after an exact zero on the
grid uses ``spawn_key=(t, attempt)``.  Results do not depend on the number
of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .nodal import components_in_ball, contour_2d, sign_change_zeros
from .transversality import GridField

__all__ = [
    "TorusEnsemble",
    "RandomSection",
    "build_ensemble",
    "sample_section",
    "eval_section",
    "eval_on_axes",
    "eval_points",
    "spectral_kernel",
    "eval_hessian",
    "separate_critical_values",
    "nodal_extract",
    "torus_contour",
    "default_grid",
    "run_trials",
    "estimate_b0",
    "estimate_prob_sigma",
    "estimate_n_sigma",
    "count_sigma_balls",
    "empirical_c1",
    "implement_local_model",
    "section_from_function_values",
    "chart_cutoff",
    "ball_points",
    "kac_rice_zeros",
    "weyl_count",
    "resolve_threads",
]

TWO_PI = 2.0 * math.pi
COEFF_STD = math.sqrt(0.5)


@dataclass
class TorusEnsemble:
    """Band-limited Laplace eigenspace ``U_L`` on the n-torus."""

    n: int
    L: float
    half_modes: np.ndarray      # (H, n) integer array

    @property
    def N_L(self) -> int:
        return 1 + 2 * len(self.half_modes)

    @property
    def kmax(self) -> int:
        return int(math.isqrt(int(math.floor(self.L))))

    @property
    def modes(self) -> np.ndarray:
        """All lattice vectors with ``|k|^2 <= L`` (closed under negation)."""
        return np.vstack([np.zeros((1, self.n), dtype=int), self.half_modes, -self.half_modes])

    @property
    def norm_const(self) -> float:
        return TWO_PI ** (-self.n / 2)

    @property
    def min_grid(self) -> int:
        """Eight nodes per shortest wavelength ``2 pi / sqrt(L)``."""
        return int(math.ceil(8.0 * math.sqrt(self.L)))


def build_ensemble(n: int, L: float) -> TorusEnsemble:
    """Enumerate the half-modes of ``U_L``.

    >>> build_ensemble(1, 100).N_L
    21
    """
    if n not in (1, 2):
        raise ValueError("torus ensemble implemented for n = 1, 2")
    if not L >= 1:
        raise ValueError("need L >= 1")
    K = math.isqrt(int(math.floor(L)))
    rng = np.arange(-K, K + 1)
    grids = np.meshgrid(*([rng] * n), indexing="ij")
    ks = np.stack([g.reshape(-1) for g in grids], axis=1)
    ks = ks[np.sum(ks * ks, axis=1) <= L]
    first = np.zeros(len(ks), dtype=int)
    for j in reversed(range(n)):
        first = np.where(ks[:, j] != 0, ks[:, j], first)
    half = ks[first > 0]
    return TorusEnsemble(n, float(L), half.astype(int))


def weyl_count(n: int, L: float):
    """``(N_L, N_L / L^(n/2))``."""
    e = build_ensemble(n, L)
    return e.N_L, e.N_L / L ** (n / 2)


@dataclass
class RandomSection:
    """Coefficients ``[a_0, a_cos(k) ..., a_sin(k) ...]`` in the real basis."""

    ensemble: TorusEnsemble
    coeffs: np.ndarray
    seed: int = None
    trial: int = None
    attempt: int = 0

    @property
    def a0(self):
        return self.coeffs[0]

    @property
    def a_cos(self):
        H = len(self.ensemble.half_modes)
        return self.coeffs[1:1 + H]

    @property
    def a_sin(self):
        H = len(self.ensemble.half_modes)
        return self.coeffs[1 + H:]

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs ** 2)))

    def __neg__(self):
        return RandomSection(self.ensemble, -self.coeffs, self.seed, self.trial, self.attempt)

    def complex_amplitudes(self) -> np.ndarray:
        """``c_k`` for k in {0} + half-modes with ``s = Re sum c_k exp(i<k,x>)``."""
        nc = self.ensemble.norm_const
        return np.concatenate([[self.a0 * nc],
                               math.sqrt(2.0) * nc * (self.a_cos - 1j * self.a_sin)])

    def lipschitz(self):
        """``(sum |coef| |k|, sum |coef| |k|^2)`` times the basis constant."""
        k = np.sqrt(np.sum(self.ensemble.half_modes.astype(float) ** 2, axis=1))
        c = math.sqrt(2.0) * self.ensemble.norm_const
        w = np.abs(self.a_cos) + np.abs(self.a_sin)
        return float(c * np.sum(w * k)), float(c * np.sum(w * k * k))


def _rng(seed, trial, attempt=0):
    key = (int(trial),) if attempt == 0 else (int(trial), int(attempt))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def sample_section(e: TorusEnsemble, seed: int, trial: int = 0, attempt: int = 0) -> RandomSection:
    """Draw N_L i.i.d. N(0, 1/2) coefficients for ``(seed, trial, attempt)``."""
    coeffs = _rng(seed, trial, attempt).normal(0.0, COEFF_STD, size=e.N_L)
    return RandomSection(e, coeffs, seed, trial, attempt)


def section_from_function_values(e: TorusEnsemble, func_vals: np.ndarray) -> RandomSection:
    """Orthogonal projection onto U_L of a function sampled on a G^n torus grid.

    ``func_vals[j]`` is the value at ``x_j = 2 pi j / G``.  Fourier
    coefficients come from the FFT (exact for trigonometric polynomials of
    degree below ``G/2``).
    """
    G = func_vals.shape[0]
    S = np.fft.fftn(func_vals) / G ** e.n
    idx = tuple(np.mod(e.half_modes[:, j], G) for j in range(e.n))
    Sk = S[idx]
    root = math.sqrt(2.0) * TWO_PI ** (e.n / 2)
    a0 = float(S[(0,) * e.n].real) * TWO_PI ** (e.n / 2)
    coeffs = np.concatenate([[a0], root * Sk.real, -root * Sk.imag])
    return RandomSection(e, coeffs)


def _check_grid(e: TorusEnsemble, G: int):
    if G < e.min_grid:
        raise ValueError(f"grid {G} below 8 nodes per wavelength ({e.min_grid}) for L={e.L}")
    if G <= 2 * e.kmax:
        raise ValueError(f"grid {G} aliases modes up to {e.kmax}")


def default_grid(e: TorusEnsemble) -> int:
    """Power of two, at least 512 in 2-D (4096 in 1-D) and 8 nodes per wavelength."""
    base = 4096 if e.n == 1 else 512
    return max(base, 1 << int(math.ceil(math.log2(max(e.min_grid, 2)))))


def _fft_fields(s: RandomSection, G: int, with_gradient: bool = True):
    e = s.ensemble
    C = np.zeros((G,) * e.n, dtype=complex)
    amps = s.complex_amplitudes()
    modes = np.vstack([np.zeros((1, e.n), dtype=int), e.half_modes])
    idx = tuple(np.mod(modes[:, j], G) for j in range(e.n))
    C[idx] = amps
    scale = G ** e.n
    vals = np.fft.ifftn(C).real * scale
    if not with_gradient:
        return vals, None
    grads = []
    for j in range(e.n):
        Cj = np.zeros_like(C)
        Cj[idx] = amps * 1j * modes[:, j]
        grads.append(np.fft.ifftn(Cj).real * scale)
    return vals, np.stack(grads, axis=-1)


def eval_section(s: RandomSection, grid: int, with_gradient: bool = True) -> GridField:
    """Values and exact gradients of ``s`` on the ``grid^n`` torus grid.

    Nodes are ``2 pi j / grid``, ``j = 0..grid-1``.  The Lipschitz bounds are
    the coefficient sums of :meth:`RandomSection.lipschitz`.
    """
    e = s.ensemble
    _check_grid(e, grid)
    vals, grads = _fft_fields(s, grid, with_gradient)
    if grads is None:
        grads = np.zeros(vals.shape + (e.n,))
    ax = TWO_PI * np.arange(grid) / grid
    lv, lg = s.lipschitz()
    return GridField([ax] * e.n, vals, grads, lv, lg, {"type": "torus"})


def eval_on_axes(s: RandomSection, axes, with_gradient: bool = True):
    """Exact values (and gradients) of ``s`` on an arbitrary tensor grid.

    Uses ``s(x) = Re sum_k c_k exp(i <k, x>)`` summed axis by axis.
    """
    e = s.ensemble
    K = e.kmax
    kk = np.arange(-K, K + 1)
    amps = s.complex_amplitudes()
    modes = np.vstack([np.zeros((1, e.n), dtype=int), e.half_modes])
    pos = tuple(modes[:, j] + K for j in range(e.n))
    E = [np.exp(1j * np.outer(np.asarray(a, dtype=float), kk)) for a in axes]

    def total(a):
        C = np.zeros((2 * K + 1,) * e.n, dtype=complex)
        C[pos] = a
        if e.n == 1:
            return (E[0] @ C).real
        return ((E[0] @ C) @ E[1].T).real

    vals = total(amps)
    if not with_gradient:
        return vals, None
    grads = np.stack([total(amps * 1j * modes[:, j]) for j in range(e.n)], axis=-1)
    return vals, grads


def eval_points(s: RandomSection, pts):
    """Values and gradients at arbitrary points ``pts`` of shape ``(P, n)``."""
    e = s.ensemble
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    ph = pts @ e.half_modes.T.astype(float)
    c = math.sqrt(2.0) * e.norm_const
    cs, sn = np.cos(ph), np.sin(ph)
    vals = s.a0 * e.norm_const + c * (cs @ s.a_cos + sn @ s.a_sin)
    # d/dx_j of (a cos + b sin) = k_j (-a sin + b cos)
    dd = c * (-sn * s.a_cos + cs * s.a_sin)
    grads = dd @ e.half_modes.astype(float)
    return vals, grads


def eval_hessian(s: RandomSection, pts):
    """Values, gradients and Hessians at points ``pts`` of shape ``(P, n)``."""
    e = s.ensemble
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    K = e.half_modes.astype(float)
    ph = pts @ K.T
    c = math.sqrt(2.0) * e.norm_const
    cs, sn = np.cos(ph), np.sin(ph)
    vals = s.a0 * e.norm_const + c * (cs @ s.a_cos + sn @ s.a_sin)
    grads = (c * (-sn * s.a_cos + cs * s.a_sin)) @ K
    # second derivative of (a cos + b sin) is -k_i k_j (a cos + b sin)
    w = -c * (cs * s.a_cos + sn * s.a_sin)
    n = e.n
    KK = (K[:, :, None] * K[:, None, :]).reshape(len(K), n * n)
    hess = (w @ KK).reshape(-1, n, n)
    return vals, grads, hess


def _critical_points(s: RandomSection, axes, values, grads, periodic: bool, K: float):
    """Critical points of ``s`` with ``|s| < K |Hess| h^2`` near cells where
    both gradient components change sign.

    ``|Hess|`` is over-estimated from corner gradient differences.  Cells
    whose corner values all exceed that level plus the quadratic variation
    across the cell are skipped.  Newton's method on the exact
    gradient starts at the remaining cell centres.  Returns
    ``(points, values, hessians)``, de-duplicated.
    """
    h = float(axes[0][1] - axes[0][0])
    g0, g1 = grads[..., 0], grads[..., 1]

    def corners(a):
        if periodic:
            a10 = np.roll(a, -1, axis=0)
            return a, a10, np.roll(a, -1, axis=1), np.roll(a10, -1, axis=1)
        return a[:-1, :-1], a[1:, :-1], a[:-1, 1:], a[1:, 1:]

    def flips(a):
        c = np.stack(corners(a))
        return (c.min(axis=0) <= 0) & (c.max(axis=0) >= 0)

    # per-cell Hessian scale from the corner gradients
    dg = [np.abs(c - corners(g)[0]) for g in (g0, g1) for c in corners(g)[1:]]
    hs = np.max(np.stack(dg), axis=0) * (2.0 / h)
    fmin = np.min(np.abs(np.stack(corners(values))), axis=0)
    level = K * float(hs.max()) * h * h
    i, j = np.nonzero(flips(g0) & flips(g1) & (fmin <= level + hs * h * h))
    if len(i) == 0:
        return np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2, 2))
    start = np.stack([axes[0][i] + h / 2, axes[1][j] + h / 2], axis=1)
    x = start.copy()
    for _ in range(12):
        _, g, H = eval_hessian(s, x)
        det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
        det = np.where(det == 0.0, np.finfo(float).tiny, det)
        dx0 = (H[:, 1, 1] * g[:, 0] - H[:, 0, 1] * g[:, 1]) / det
        dx1 = (H[:, 0, 0] * g[:, 1] - H[:, 1, 0] * g[:, 0]) / det
        step = np.stack([dx0, dx1], axis=1)
        # damp to at most one cell per iteration
        nrm = np.sqrt(np.sum(step ** 2, axis=1))
        step *= np.minimum(1.0, h / np.maximum(nrm, 1e-300))[:, None]
        x -= step
    v, g, H = eval_hessian(s, x)
    scale = np.sqrt(np.sum(H.reshape(len(x), -1) ** 2, axis=1))
    ok = (np.sqrt(np.sum(g ** 2, axis=1)) <= 1e-8 * scale * h) & \
        (np.max(np.abs(x - start), axis=1) <= 2 * h)
    x, v, H = x[ok], v[ok], H[ok]
    if periodic:
        x = np.mod(x, TWO_PI)
    keep = []
    for k in range(len(x)):
        d = x[keep] - x[k] if keep else np.zeros((0, 2))
        if periodic and len(d):
            d -= TWO_PI * np.round(d / TWO_PI)
        if not len(d) or np.min(np.sum(d * d, axis=1)) > (h / 4) ** 2:
            keep.append(k)
    return x[keep], v[keep], H[keep]


def separate_critical_values(s: RandomSection, values, axes, grads, periodic: bool,
                             K: float = 2.0):
    """Grid values of a modified section whose zero set has the same topology.

    Marching squares mis-resolves the nodal set near a critical point ``p``
    whose value ``v`` is small compared with ``|Hess| h^2``: the two branches
    near a saddle, or a tiny oval near an extremum, fall inside one cell.
    For each such point the field is shifted near ``p`` by
    ``(sign(v) tau - v) phi(|x - p|)``, ``tau = K |Hess(p)| h^2``.  Inside the
    plateau of ``phi`` this is a change of level with no critical value
    crossed, so the zero set keeps its topology while the critical value
    moves to ``sign(v) tau``, which the grid resolves.  The plateau radius is
    ``2 sqrt(tau / mu)`` (``mu`` the smallest Hessian eigenvalue in modulus)
    and the support twice that.

    Returns ``(values, n_shifted)``.
    """
    from .local_model import smoothstep5

    h = float(axes[0][1] - axes[0][0])
    pts, v, H = _critical_points(s, axes, values, grads, periodic, K)
    if len(pts) == 0:
        return values, 0
    eig = np.abs(np.linalg.eigvalsh(H))
    lam_max, lam_min = eig.max(axis=1), eig.min(axis=1)
    tau = K * lam_max * h * h
    sel = np.abs(v) < tau
    if not sel.any():
        return values, 0
    out = np.array(values, dtype=float, copy=True)
    for p, vp, tp, mu in zip(pts[sel], v[sel], tau[sel], lam_min[sel]):
        r_in = 2.0 * math.sqrt(tp / max(mu, 1e-300))
        r_in = min(r_in, 8.0 * h)
        r_out = 2.0 * r_in
        c = (1.0 if vp >= 0 else -1.0) * tp - vp
        idx = []
        offs = []
        for a, pc in zip(axes, p):
            d = a - pc
            if periodic:
                d = np.mod(d + math.pi, TWO_PI) - math.pi
            near = np.flatnonzero(np.abs(d) <= r_out)
            idx.append(near)
            offs.append(d[near])
        if not all(len(ix) for ix in idx):
            continue
        r = np.sqrt(offs[0][:, None] ** 2 + offs[1][None, :] ** 2)
        phi = 1.0 - smoothstep5((r - r_in) / (r_out - r_in))
        out[np.ix_(idx[0], idx[1])] += c * phi
    return out, int(sel.sum())


def spectral_kernel(e: TorusEnsemble, x, y) -> float:
    """``e_L(x, y) = (2 pi)^-n sum_{|k|^2 <= L} cos<k, x - y>``."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    d = np.atleast_1d(d)
    ph = e.half_modes.astype(float) @ d
    return float((1.0 + 2.0 * np.sum(np.cos(ph))) / TWO_PI ** e.n)


# ---------------------------------------------------------------------------
# nodal sets

@dataclass
class TrialRecord:
    b0: int
    n_loops_in_ball: int
    sup_norm: float
    grad_sup: float
    n_saddles: int = 0
    attempt: int = 0

    def to_json(self) -> dict:
        return {"b0": self.b0, "n_loops_in_ball": self.n_loops_in_ball,
                "sup_norm": self.sup_norm,
                "grad_sup": np.atleast_1d(self.grad_sup).astype(float).tolist()}


def torus_contour(s: RandomSection, G: int, fields=None):
    """Periodic contour graph of a section on the ``G^2`` torus grid.

    Near-zero critical values are separated first (see
    :func:`separate_critical_values`) so the contour topology does not
    depend on ``G``.  ``fields`` may carry precomputed ``(values, gradients)``.
    """
    vals, grads = fields if fields is not None else _fft_fields(s, G)
    ax = [TWO_PI * np.arange(G) / G] * 2
    vals, _ = separate_critical_values(s, vals, ax, grads, periodic=True)
    return contour_2d(vals, ax, periodic=True)


def nodal_extract(field_: GridField, n: int, func=None, balls=(), with_loops=False,
                  section=None):
    """Nodal summary of a torus field sampled on the full periodic grid.

    n = 1: sorted zeros from sign changes, refined by bisection on ``func``
    when given.  n = 2: periodic marching squares; ``b0`` is the number of
    contour components.  Passing the ``section`` the field was sampled from
    enables the separation of near-zero critical values.
    """
    from .nodal import NodalSummary, summarize

    if np.any(field_.values == 0.0):
        raise ValueError("exact zero at a grid node; redraw the section")
    if n == 1:
        z = sign_change_zeros(field_.values, field_.axes[0], func=func, periodic=True)
        return NodalSummary(1, len(z), list(z), [], 0, len(z))
    vals = field_.values
    if section is not None:
        vals, _ = separate_critical_values(section, vals, field_.axes, field_.gradients,
                                           periodic=True)
    ct = contour_2d(vals, field_.axes, periodic=True)
    return summarize(ct, balls, with_loops)


def _ball_axes(x0, radius, m):
    return [np.linspace(c - radius, c + radius, m) for c in x0]


def _one_trial(e, t, seed, G, x0, R, want_b0, c1_points):
    attempt = 0
    while True:
        s = sample_section(e, seed, t, attempt)
        if want_b0:
            vals, grads = _fft_fields(s, G, with_gradient=e.n == 2)
            if np.any(vals == 0.0):
                attempt += 1
                continue
        break
    b0 = -1
    saddles = 0
    inball = 0
    rad = R / math.sqrt(e.L) if R is not None else None
    if want_b0:
        if e.n == 1:
            b0 = int(np.count_nonzero((vals >= 0) != (np.roll(vals, -1) >= 0)))
        else:
            ct = torus_contour(s, G, (vals, grads))
            b0 = ct.n_components
            saddles = ct.n_saddles
            if rad is not None:
                inball = components_in_ball(ct, x0, rad, ct.period)
    elif rad is not None and e.n == 2:
        # local patch: loops strictly inside the ball are closed inside it
        h = TWO_PI / G
        m = 2 * int(math.ceil(rad / h)) + 5
        axes = _ball_axes(x0, (m - 1) * h / 2, m)
        pv, pg = eval_on_axes(s, axes)
        pv, _ = separate_critical_values(s, pv, axes, pg, periodic=False)
        ct = contour_2d(pv, axes, periodic=False)
        inball = components_in_ball(ct, x0, rad)
        saddles = ct.n_saddles
    sup = gsup = float("nan")
    if c1_points is not None:
        v, g = eval_points(s, c1_points)
        sup = float(np.max(np.abs(v)))
        gsup = np.max(np.abs(g), axis=0)
    return TrialRecord(b0, inball, sup, gsup, saddles, attempt)


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = int(os.environ.get("NODAL_LAB_THREADS", "1") or 1)
    return max(1, int(threads))


def ball_points(x0, radius: float, m: int = 41) -> np.ndarray:
    """Tensor points in ``B(x0, radius)`` plus ``8 m`` points on its boundary."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = len(x0)
    if n == 1:
        return np.linspace(x0[0] - radius, x0[0] + radius, 8 * m)[:, None]
    axes = _ball_axes(x0, radius, m)
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    P = P[np.sum((P - x0) ** 2, axis=1) <= radius ** 2]
    phi = TWO_PI * np.arange(8 * m) / (8 * m)
    rim = x0 + radius * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    return np.vstack([P, rim])


def run_trials(e: TorusEnsemble, trials: int, seed: int, grid=None, x0=None, R=None,
               want_b0: bool = True, c1: bool = False, threads=None):
    """Run independent trials; returns a list of :class:`TrialRecord`.

    ``R`` sets the ball ``B(x0, R / sqrt(L))`` used for loop containment and,
    when ``c1`` is set, for the sup norms.
    """
    G = grid or default_grid(e)
    _check_grid(e, G)
    if x0 is None:
        x0 = [math.pi] * e.n
    x0 = list(map(float, x0))
    pts = None
    if c1:
        if R is None:
            raise ValueError("sup norms need a ball radius R")
        pts = ball_points(x0, R / math.sqrt(e.L))
    job = lambda t: _one_trial(e, t, seed, G, x0, R, want_b0, pts)  # noqa: E731
    nt = resolve_threads(threads)
    if nt > 1:
        with ThreadPoolExecutor(max_workers=nt) as ex:
            return list(ex.map(job, range(trials)))
    return [job(t) for t in range(trials)]


def _mean_stderr(x):
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float(x.mean()), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def estimate_b0(e: TorusEnsemble, trials: int, grid=None, seed: int = 0, threads=None):
    """Mean of ``b0 / L^(n/2)`` and its standard error."""
    recs = run_trials(e, trials, seed, grid, want_b0=True, threads=threads)
    return _mean_stderr([r.b0 / e.L ** (e.n / 2) for r in recs])


def kac_rice_zeros(e: TorusEnsemble) -> float:
    """Expected zero count on the circle: ``2 sqrt(sum_k k^2 / (K + 1/2))``."""
    if e.n != 1:
        raise ValueError("Kac-Rice oracle is for n = 1")
    K = e.kmax
    return 2.0 * math.sqrt(sum(k * k for k in range(1, K + 1)) / (K + 0.5))


def estimate_prob_sigma(e: TorusEnsemble, x0, R: float, sigma_type: str, trials: int,
                        grid=None, seed: int = 0, threads=None):
    """Fraction of trials with >= 1 (``one_loop``) or >= 2 (``two_loops``)
    closed nodal loops strictly inside ``B(x0, R / sqrt(L))``.

    Returns ``(p_hat, stderr)`` with the binomial standard error.
    """
    if e.n != 2:
        raise ValueError("loop containment needs n = 2")
    need = {"one_loop": 1, "two_loops": 2}.get(sigma_type)
    if need is None:
        raise ValueError(f"unknown sigma type {sigma_type!r}")
    recs = run_trials(e, trials, seed, grid, x0=x0, R=R, want_b0=False, threads=threads)
    hits = np.array([r.n_loops_in_ball >= need for r in recs], dtype=float)
    p = float(hits.mean())
    return p, math.sqrt(max(p * (1 - p), 0.0) / trials)


def contractible_loops(ct):
    """``(centroid, polyline)`` for every closed, null-homotopic component."""
    out = []
    for c in range(ct.n_components):
        if not ct.closed[c]:
            continue
        poly = ct.polyline(c)
        # an unwrapped loop that winds around the torus does not close up
        if np.max(np.abs(poly[-1] - poly[0])) > 1e-9:
            continue
        out.append((poly[:-1].mean(axis=0), poly))
    return out


def _torus_dist(a, b):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d -= TWO_PI * np.round(d / TWO_PI)
    return np.sqrt(np.sum(d * d, axis=-1))


def count_sigma_balls(ct, radius: float, sigma_type: str) -> int:
    """Greedy count of disjoint balls of the given radius each containing a copy of Sigma.

    A candidate ball is centred at a loop centroid (``one_loop``) or at the
    midpoint of two loop centroids (``two_loops``) and must contain the loop(s)
    strictly.  Candidates are taken tightest first and kept when they are
    disjoint from every ball kept so far.
    """
    need = {"one_loop": 1, "two_loops": 2}.get(sigma_type)
    if need is None:
        raise ValueError(f"unknown sigma type {sigma_type!r}")
    loops = contractible_loops(ct)
    cands = []
    if need == 1:
        for cen, poly in loops:
            # centroid of the unwrapped polyline; distances use the same chart
            fit = float(np.max(np.sqrt(np.sum((poly - cen) ** 2, axis=1))))
            if fit < radius:
                cands.append((fit, np.mod(cen, TWO_PI)))
    else:
        for i in range(len(loops)):
            for j in range(i + 1, len(loops)):
                ci, pi_ = loops[i]
                cj, pj = loops[j]
                d = cj - ci
                shift = TWO_PI * np.round(d / TWO_PI)
                cen = ci + 0.5 * (d - shift)
                fit = max(float(np.max(_torus_dist(pi_, cen))),
                          float(np.max(_torus_dist(pj, cen))))
                if fit < radius:
                    cands.append((fit, np.mod(cen, TWO_PI)))
    cands.sort(key=lambda c: (c[0], tuple(c[1])))
    kept = []
    for _, cen in cands:
        if all(_torus_dist(cen, k) >= 2 * radius for k in kept):
            kept.append(cen)
    return len(kept)


def estimate_n_sigma(e: TorusEnsemble, R: float, sigma_type: str, trials: int, grid=None,
                     seed: int = 0, threads=None):
    """Mean of ``N_Sigma / L^(n/2)`` with balls of radius ``R / sqrt(L)``, and its stderr.

    ``N_Sigma`` is approximated by :func:`count_sigma_balls`, a greedy maximal
    family; it is a lower estimate of the largest such family.
    """
    if e.n != 2:
        raise ValueError("loop containment needs n = 2")
    G = grid or default_grid(e)
    _check_grid(e, G)
    rad = R / math.sqrt(e.L)

    def job(t):
        ct = torus_contour(sample_section(e, seed, t), G)
        return count_sigma_balls(ct, rad, sigma_type)

    nt = resolve_threads(threads)
    if nt > 1:
        with ThreadPoolExecutor(max_workers=nt) as ex:
            counts = list(ex.map(job, range(trials)))
    else:
        counts = [job(t) for t in range(trials)]
    return _mean_stderr(np.asarray(counts, dtype=float) / e.L)


def empirical_c1(e: TorusEnsemble, x0, R: float, trials: int, seed: int = 0, threads=None):
    """Monte Carlo means of normalized sup norms over ``B(x0, R / sqrt(L))``.

    Returns ``((sup_mean, sup_stderr), [(grad_j_mean, grad_j_stderr), ...])``
    for ``L^(-n/4) sup|s|`` and ``L^(-(n+2)/4) sup|d_j s|``.
    """
    recs = run_trials(e, trials, seed, x0=x0, R=R, want_b0=False, c1=True, threads=threads)
    a = e.L ** (-e.n / 4)
    b = e.L ** (-(e.n + 2) / 4)
    sup = _mean_stderr([r.sup_norm * a for r in recs])
    grads = [_mean_stderr([r.grad_sup[j] * b for r in recs]) for j in range(e.n)]
    return sup, grads


# ---------------------------------------------------------------------------
# implementing a band-limited local model in U_L

def chart_cutoff(r, plateau: float = math.pi / 2, support: float = 0.95 * math.pi):
    """Radial cutoff, 1 for ``r <= plateau``, 0 for ``r >= support`` (quintic smoothstep)."""
    from .local_model import smoothstep5

    t = (np.asarray(r, dtype=float) - plateau) / (support - plateau)
    return 1.0 - smoothstep5(t)


@dataclass
class LocalModelResult:
    section: RandomSection
    conv_error: float
    l2_norm: float
    f_l2_norm: float
    grid: int
    loops_in_ball: int
    ball_radius: float
    details: dict = field(default_factory=dict)


def implement_local_model(f, e: TorusEnsemble, x0, R: float, grid=None,
                          eval_points_per_axis: int = 121) -> LocalModelResult:
    """Project ``L^(n/4) chi(x - x0) f(sqrt(L)(x - x0))`` onto ``U_L``.

    Parameters
    ----------
    f : BandLimitedField
        Field with Fourier support in ``B(0, 1)``; called with
        ``f.grid(axes)`` in its own variable ``z``.
    R : float
        Radius of the ball (in ``z``) where the convergence error
        ``sup |L^(-n/4) s_L(x0 + z/sqrt(L)) - f(z)|`` and the nodal set are
        measured.

    Raises
    ------
    ValueError
        If the FFT grid is too coarse for the modes of ``U_L`` or the ball
        does not fit the chart.
    """
    n = e.n
    if n != 2:
        raise ValueError("local model implemented for n = 2")
    rootL = math.sqrt(e.L)
    if R / rootL >= 0.95 * math.pi:
        raise ValueError("measurement ball does not fit inside the chart")
    G = grid or max(256, 1 << int(math.ceil(math.log2(6 * rootL))))
    if G < 6 * rootL:
        raise ValueError(f"grid {G} under-resolves frequencies up to {rootL:.1f}")
    x0 = np.asarray(x0, dtype=float)
    ax = TWO_PI * np.arange(G) / G
    # signed minimal offsets per axis keep the tensor structure
    offs = [np.mod(ax - c + math.pi, TWO_PI) - math.pi for c in x0]
    vals, _ = f.grid([rootL * o for o in offs], with_gradient=False)
    r = np.sqrt(offs[0][:, None] ** 2 + offs[1][None, :] ** 2)
    tilde = e.L ** (n / 4) * chart_cutoff(r) * vals
    s = section_from_function_values(e, tilde)
    m = eval_points_per_axis
    zax = np.linspace(-R, R, m)
    fz, _ = f.grid([zax, zax], with_gradient=False)
    sz, _ = eval_on_axes(s, [c + zax / rootL for c in x0], with_gradient=False)
    sz = sz * e.L ** (-n / 4)
    inside = zax[:, None] ** 2 + zax[None, :] ** 2 <= R * R
    err = float(np.max(np.abs(sz - fz)[inside]))
    ct = contour_2d(sz, [zax, zax], periodic=False)
    loops = components_in_ball(ct, [0.0, 0.0], R)
    return LocalModelResult(s, err, s.l2_norm(), f.l2_norm(), G, loops, R / rootL,
                            {"saddles": ct.n_saddles, "components": ct.n_components})
