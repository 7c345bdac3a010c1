"""Explicit constants of the transversality lower bounds, in log domain.

Everything returned here is a :class:`~nodal_lab.logreal.LogReal`.  The
quantities range from order one (the sup-norm constants rho and theta) down
to ``exp(-exp(257 n^1.5))`` (the final lower bound for Laplace operators),
so all products and sums are carried out on logarithms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from .logreal import LogReal, as_logreal, log_erfc_scaled
from .optimize import grid_golden_minimize
from .spectral_domain import (SymbolBody, ball, log_ball_volume, mc_integrate,
                              power_moment)

__all__ = [
    "PairData",
    "ChainViolation",
    "BoundaryOptimumWarning",
    "moment_profile",
    "rho_K",
    "theta_K_j",
    "rho_theta_upper",
    "tau",
    "p_of_tau",
    "remark_lower",
    "p_sigma_K_R",
    "c_sigma_homogeneous",
    "theorem3_tau",
    "theorem3_bounds",
    "corollary_chain",
    "corollary_bound",
]

T_LOG_LO = math.log(1e-6)
T_LOG_HI = math.log(1e6)
LOG_SQRT_PI = 0.5 * math.log(math.pi)


class ChainViolation(RuntimeError):
    """A displayed inequality of the explicit chain failed for computed values."""


class BoundaryOptimumWarning(UserWarning):
    """The 1-D optimum sits at an end of the search interval."""


@dataclass
class PairData:
    """A window, an L2 norm and a list of admissible (delta, epsilon) pairs.

    ``l2_norm`` may be a float or a LogReal.  Zero is accepted (it makes tau
    vanish); negative values are not.
    """

    l2_norm: object
    window_radius: float
    pairs: list = field(default_factory=list)

    def __post_init__(self):
        self.l2_norm = as_logreal(self.l2_norm)
        if not self.window_radius > 0:
            raise ValueError("window radius must be positive")
        self.pairs = [(float(d), float(e)) for d, e in self.pairs]
        for d, e in self.pairs:
            if not (d > 0 and e > 0):
                raise ValueError("transversality pairs must be positive")


def _k_of(n: int) -> int:
    return n // 2 + 1


# ---------------------------------------------------------------------------
# rho_K and theta_K^j

def moment_profile(body: SymbolBody, j=None, samples: int = 200_000, seed: int = 0):
    """Tuple-summed moments M_0..M_k used in the sup-norm constants.

    ``M_i`` is the sum over ordered tuples ``(j_1..j_i)`` of the integral over
    K of ``prod xi_{j_k}^2``, times ``xi_j^2`` when ``j`` is given.  Exact
    for balls; Monte Carlo otherwise.

    Returns
    -------
    logs : list of float
        ``log M_i`` (``-inf`` when the moment vanishes).
    rel_err : list of float
        Relative standard errors (zeros for exact moments).
    """
    n = body.n
    k = _k_of(n)
    if j is not None and not 1 <= j <= n:
        raise ValueError(f"coordinate {j} outside 1..{n}")
    if body.degenerate:
        return [-math.inf] * (k + 1), [0.0] * (k + 1)
    if body.kind == "ball":
        r = body.params["radius"]
        logs = [float(power_moment(n, r, i, j).log) for i in range(k + 1)]
        return logs, [0.0] * (k + 1)

    def g(pts):
        sq = np.einsum("ij,ij->i", pts, pts)
        extra = pts[:, j - 1] ** 2 if j is not None else 1.0
        return np.stack([sq ** i * extra for i in range(k + 1)])

    est, err, _ = mc_integrate(body, g, samples, seed)
    logs = [math.log(e) if e > 0 else -math.inf for e in est]
    rel = [float(s / e) if e > 0 else 0.0 for e, s in zip(est, err)]
    return logs, rel


def _inf_over_t(n: int, R: float, log_moments, label: str):
    k = _k_of(n)
    if all(lm == -math.inf for lm in log_moments):
        return LogReal.zero(), math.nan
    half = np.array([0.5 * lm for lm in log_moments])
    lfact = np.array([math.lgamma(i + 1) for i in range(k + 1)])
    ii = np.arange(k + 1)

    def obj(v):
        terms = ii * v - lfact + half
        m = terms.max()
        lse = m + math.log(np.exp(terms - m).sum())
        return 0.5 * n * (math.log(R + math.exp(v)) - v) + lse

    res = grid_golden_minimize(obj, T_LOG_LO, T_LOG_HI)
    if res.at_boundary:
        warnings.warn(f"{label}: infimum over t not bracketed, boundary "
                      f"value at t={math.exp(res.x):.3g} reported",
                      BoundaryOptimumWarning, stacklevel=3)
    log_pref = math.log(math.sqrt(2.0) * k) - 0.5 * n * math.log(2 * math.pi)
    return LogReal(log_pref + res.fx), math.exp(res.x)


def rho_K(body: SymbolBody, R: float, samples: int = 200_000, seed: int = 0):
    """Sup-norm constant rho_K(R) and the minimizing ``t``.

    The infimum over ``t > 0`` is searched in ``log t`` on ``[1e-6, 1e6]``.
    A degenerate body gives ``(0, nan)``.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    logs, _ = moment_profile(body, None, samples, seed)
    return _inf_over_t(body.n, R, logs, "rho_K")


def theta_K_j(body: SymbolBody, R: float, j: int, samples: int = 200_000,
              seed: int = 0):
    """Gradient constant theta_K^j(R) and the minimizing ``t``."""
    if not R > 0:
        raise ValueError("R must be positive")
    logs, _ = moment_profile(body, j, samples, seed)
    return _inf_over_t(body.n, R, logs, "theta_K_j")


def rho_theta_interval(body: SymbolBody, R: float, j: int = 1, z: float = 3.0,
                       samples: int = 200_000, seed: int = 0):
    """Intervals for rho and theta when moments are Monte Carlo estimates.

    Both constants are increasing in every moment, so moments shifted by
    ``-z`` and ``+z`` standard errors give a lower and an upper value.
    Returns ``((rho_lo, rho_hi), (theta_lo, theta_hi))``.
    """
    out = []
    for jj in (None, j):
        logs, rel = moment_profile(body, jj, samples, seed)
        pair = []
        for sgn in (-1.0, 1.0):
            shifted = [lm + math.log(max(1.0 + sgn * z * r, 1e-300))
                       if lm > -math.inf else lm for lm, r in zip(logs, rel)]
            pair.append(_inf_over_t(body.n, R, shifted, "interval")[0])
        out.append(tuple(pair))
    return tuple(out)


def rho_theta_upper(nu, d: float, n: int, R: float):
    """Closed-form upper bounds for rho and theta (evaluation at ``t = R``).

    ``rho <= sqrt(2 nu) k exp(R d sqrt(n)) / sqrt(pi)^n`` with
    ``k = floor(n/2 + 1)``; the theta bound carries an extra factor ``d``.
    """
    nu = as_logreal(nu)
    if nu.is_zero:
        return LogReal.zero(), LogReal.zero()
    k = _k_of(n)
    log_rho = (0.5 * (math.log(2.0) + nu.log) + math.log(k)
               + R * d * math.sqrt(n) - n * LOG_SQRT_PI)
    rho = LogReal(log_rho)
    return rho, rho * d


# ---------------------------------------------------------------------------
# tau and the Gaussian-tail probability

def tau(body: SymbolBody, pd: PairData, samples: int = 200_000, seed: int = 0) -> LogReal:
    """Transversality scale of a certified pair family.

    ``||f|| * min over pairs of [rho(R)/delta + n sqrt(n)/epsilon * sum_j theta_j(R)]``
    with ``R`` the window radius.
    """
    if not pd.pairs:
        raise ValueError("no certified transversality pair")
    n = body.n
    R = pd.window_radius
    rho, _ = rho_K(body, R, samples, seed)
    if body.kind == "ball":
        th, _ = theta_K_j(body, R, 1)
        theta_sum = th * n
    else:
        theta_sum = LogReal.zero()
        for j in range(1, n + 1):
            theta_sum = theta_sum + theta_K_j(body, R, j, samples, seed)[0]
    best = None
    for delta, eps in pd.pairs:
        val = rho / delta + theta_sum * (n * math.sqrt(n) / eps)
        if best is None or val < best:
            best = val
    return pd.l2_norm * best


def p_of_tau(t) -> LogReal:
    """sup over T >= tau of (1 - tau/T) * (1/sqrt(pi)) * int_T^inf exp(-s^2) ds.

    The search variable is ``log u`` with ``T = tau + u``; this keeps the
    optimum (near ``u = 1/(2 tau)`` for large tau) resolvable when tau is
    astronomically large.  The tail integral is ``erfc(T)/2``.
    """
    t = as_logreal(t)
    if t.is_zero:
        return LogReal.from_value(0.5)
    tv = mp.exp(t.log)
    lo = float(mp.log(mp.mpf("1e-9")) - 2 * mp.log1p(tv))
    hi = math.log(40.0)

    def neg(v):
        u = mp.exp(v)
        return -(v - mp.log(tv + u) + log_erfc_scaled(tv, u))

    res = grid_golden_minimize(neg, lo, hi)
    return LogReal(-res.fx - tv * tv - math.log(2.0))


def remark_lower(t) -> LogReal:
    """The elementary lower bound ``exp(-(2 tau + 1)^2) / (2 sqrt(pi))``."""
    t = as_logreal(t)
    tv = mp.exp(t.log) if not t.is_zero else mp.mpf(0)
    return LogReal(-(2 * tv + 1) ** 2 - math.log(2.0) - LOG_SQRT_PI)


def p_sigma_K_R(body: SymbolBody, R: float, certs):
    """Best probability lower bound over certified pairs whose window fits in R.

    Returns ``(value, has_witness)``; an empty list gives ``(0, False)``.
    """
    best = LogReal.zero()
    for pd in certs:
        if pd.window_radius > R:
            raise ValueError(f"window radius {pd.window_radius} exceeds R={R}")
        val = p_of_tau(tau(body, pd))
        if val > best:
            best = val
    return best, bool(certs)


def c_sigma_homogeneous(p_curve, vol_M: float, n: int) -> LogReal:
    """Lower bound for the density constant from a sampled curve R -> p(R).

    ``p_curve`` is a sequence of ``(R, p)`` pairs; the result is
    ``vol_M / 2^n * max_R p(R) / Vol(B(0, R))``.  The metric is held fixed,
    so this is a lower bound for the constant that takes a sup over metrics.
    """
    p_curve = list(p_curve)
    if not p_curve:
        raise ValueError("empty R grid")
    best = LogReal.zero()
    for R, p in p_curve:
        p = as_logreal(p)
        if p.is_zero:
            continue
        val = p / LogReal(log_ball_volume(n, R))
        if val > best:
            best = val
    if best.is_zero:
        return best
    return best * vol_M / LogReal(n * math.log(2.0))


# ---------------------------------------------------------------------------
# explicit chains for operators with ball-sandwiched symbol

def theorem3_tau(n: int, c_pg: float, d_pg: float) -> LogReal:
    """Closed-form tau for the product-of-spheres barrier.

    ``20 (n+6)^(11/2) / sqrt(Gamma(n/2+1)) * (48 n d/c)^((n+2)/2)
    * exp(48 sqrt(5) n^(3/2) d/c)``.
    """
    if not 0 < c_pg <= d_pg:
        raise ValueError("need 0 < c_pg <= d_pg")
    ratio = d_pg / c_pg
    log_t = (math.log(20.0) + 5.5 * math.log(n + 6) - 0.5 * math.lgamma(n / 2 + 1)
             + 0.5 * (n + 2) * math.log(48 * n * ratio)
             + 48 * math.sqrt(5.0) * n ** 1.5 * ratio)
    return LogReal(log_t)


def theorem3_bounds(n: int, c_pg: float, d_pg: float, vol_M: float, tau_value=None):
    """Lower bounds ``(c_lower, p_lower)`` derived from the closed-form tau.

    ``p_lower = exp(-(2 tau + 1)^2) / (2 sqrt(pi))`` and
    ``c_lower = p_lower * c^n vol_M / (2^n Vol(B(0, 48 sqrt(5) n)))``.
    ``tau_value`` overrides the closed-form tau.
    """
    t = theorem3_tau(n, c_pg, d_pg) if tau_value is None else as_logreal(tau_value)
    p_lower = remark_lower(t)
    log_c = (p_lower.log - n * math.log(2.0)
             - log_ball_volume(n, 48 * math.sqrt(5.0) * n)
             + n * math.log(c_pg) + math.log(vol_M))
    return LogReal(log_c), p_lower


@dataclass
class ChainReport:
    n: int
    operator: str
    value: LogReal
    tau: LogReal
    p_lower: LogReal
    checks: list

    def to_json(self) -> dict:
        return {"n": self.n, "operator": self.operator,
                "value": self.value.to_json(), "tau": self.tau.to_json(),
                "p_lower": self.p_lower.to_json(), "checks": self.checks}


def _loglog_neg(x: LogReal) -> mp.mpf:
    """log(-log x) for 0 < x < 1."""
    return mp.log(-x.log)


def corollary_chain(n: int, operator: str = "laplace", vol_M: float = 1.0) -> ChainReport:
    """Evaluate the explicit chain for Laplace (m=2) or Dirichlet-to-Neumann (m=1).

    Both operators have unit-ball symbol bodies, so ``c_pg = d_pg = 1`` and
    the chain is identical; ``m`` only enters the power of L elsewhere.

    Each displayed inequality is checked on the computed values.  The check
    list records ``lhs`` and ``rhs`` (as strings of the compared quantities),
    whether it holds, and whether a failure is fatal.  The intermediate
    ``-(2tau+1)^2 - 3/2 - 6 ln n - n ln n`` display is recorded as
    informational: its prefactor term is below ``-3/2 - 6 ln n - n ln n`` for
    every n, but the final double-exponential bound does not depend on it.
    """
    if operator not in ("laplace", "dtn"):
        raise ValueError(f"unknown operator {operator!r}")
    if n < 1:
        raise ValueError("n must be positive")
    n15 = n ** 1.5
    t = theorem3_tau(n, 1.0, 1.0)
    c_lower, p_lower = theorem3_bounds(n, 1.0, 1.0, vol_M)
    per_vol = c_lower / vol_M
    tv = mp.exp(t.log)
    sq = (2 * tv + 1) ** 2
    prefactor = (-(n + 1) * math.log(2.0) - LOG_SQRT_PI
                 - n * math.log(48 * math.sqrt(5.0) * n)
                 - 0.5 * n * math.log(math.pi) + math.lgamma(n / 2 + 1))
    display = -1.5 - 6 * math.log(n) - n * math.log(n)
    checks = []

    def add(name, lhs, rhs, holds, hard=True):
        checks.append({"name": name, "lhs": mp.nstr(lhs, 12),
                       "rhs": mp.nstr(rhs, 12), "holds": bool(holds),
                       "hard": hard})

    add("log tau <= 127 n^1.5", t.log, 127 * n15, t.log <= 127 * n15)
    add("(2tau+1)^2 <= exp(256 n^1.5) [log form]", mp.log(sq), 256 * n15,
        mp.log(sq) <= 256 * n15)
    add("c/vol >= exp(-(2tau+1)^2 + prefactor) [exact]",
        per_vol.log, -sq + prefactor,
        abs(per_vol.log - (-sq + prefactor)) <= 1e-12 * abs(sq) + 1e-9)
    add("prefactor >= -3/2 - 6 ln n - n ln n", prefactor, display,
        prefactor >= display, hard=False)
    add("log(-log(c/vol)) <= 257 n^1.5", _loglog_neg(per_vol), 257 * n15,
        _loglog_neg(per_vol) <= 257 * n15)
    add("log(-log p_lower) <= 257 n^1.5", _loglog_neg(p_lower),
        257 * n15, _loglog_neg(p_lower) <= 257 * n15)
    return ChainReport(n, operator, c_lower, t, p_lower, checks)


def corollary_bound(n: int, operator: str = "laplace", vol_M: float = 1.0) -> LogReal:
    """Double-exponential lower bound for the Betti-number density constant.

    Raises
    ------
    ChainViolation
        If any hard inequality of the chain fails for the computed values.
    """
    rep = corollary_chain(n, operator, vol_M)
    bad = [c for c in rep.checks if c["hard"] and not c["holds"]]
    if bad:
        raise ChainViolation("; ".join(c["name"] for c in bad))
    return rep.value


def ball_constants(n: int, radius: float, R: float):
    """rho and theta_1 for a ball symbol body; theta is the same for every j."""
    b = ball(n, radius)
    return rho_K(b, R)[0], theta_K_j(b, R, 1)[0]
