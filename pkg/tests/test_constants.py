import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar
from scipy.special import erfc

from nodal_lab import constants as K
from nodal_lab.logreal import LogReal
from nodal_lab.spectral_domain import SymbolBody, ball

# Oracle: bounded scalar minimization over log t of the sup-norm objective
# with hand-integrated ball moments (scipy, independent of the module search).
RHO_1 = 1.7458269298504323        # ball(1, 1), R = 1, t* = 0.71360
THETA_1 = 1.1018302954229693
RHO_2 = 3.141452317547373         # ball(2, 1), R = 1, t* = 0.82431
THETA_2 = 1.6858032728095464
RHO_2_R5 = 9.307204234444999
# Oracle: dense grid in T followed by bounded refinement, mpmath erfc.
P_OF_TAU = {0.1: 0.22391988236315893, 1.0: 0.007714009223592914,
            2.0: 8.476686251983693e-05, 5.0: 5.3948288936325226e-15}


def _oracle_inf(n, moments, R):
    k = n // 2 + 1

    def f(lt):
        t = math.exp(lt)
        return ((R + t) / t) ** (n / 2) * sum(t ** i / math.factorial(i) * math.sqrt(moments[i])
                                             for i in range(k + 1))

    r = minimize_scalar(f, bounds=(-10, 10), method="bounded", options={"xatol": 1e-12})
    return math.sqrt(2) * k / (2 * math.pi) ** (n / 2) * r.fun


def test_rho_theta_frozen_values():
    b1, b2 = ball(1, 1.0), ball(2, 1.0)
    v, t = K.rho_K(b1, 1.0)
    assert float(v) == pytest.approx(RHO_1, rel=1e-9)
    assert t == pytest.approx(0.73, abs=0.03)
    assert float(K.theta_K_j(b1, 1.0, 1)[0]) == pytest.approx(THETA_1, rel=1e-9)
    assert float(K.rho_K(b2, 1.0)[0]) == pytest.approx(RHO_2, rel=1e-9)
    assert float(K.theta_K_j(b2, 1.0, 1)[0]) == pytest.approx(THETA_2, rel=1e-9)
    assert float(K.rho_K(b2, 5.0)[0]) == pytest.approx(RHO_2_R5, rel=1e-9)


def test_rho_against_live_oracle_n3():
    n = 3
    sphere = 4 * math.pi
    moments = [sphere / (n + 2 * i) for i in range(3)]
    assert float(K.rho_K(ball(3, 1.0), 2.0)[0]) == pytest.approx(_oracle_inf(3, moments, 2.0),
                                                                 rel=1e-8)


def test_theta_independent_of_j_for_ball():
    b = ball(3, 1.3)
    vals = [K.theta_K_j(b, 2.0, j)[0] for j in (1, 2, 3)]
    assert vals[0] == vals[1] == vals[2]


def test_degenerate_body_gives_zero():
    v, t = K.rho_K(SymbolBody(2, "empty"), 3.0)
    assert v.is_zero and math.isnan(t)


def test_upper_bound_examples():
    r, th = K.rho_theta_upper(2.0, 1.0, 1, 1.0)
    assert float(r) == pytest.approx(2 * math.e / math.sqrt(math.pi), rel=1e-14)
    assert float(th) == pytest.approx(2 * math.e / math.sqrt(math.pi), rel=1e-14)
    r, th = K.rho_theta_upper(math.pi, 1.0, 2, 0.0)
    assert float(r) == pytest.approx(2 * math.sqrt(2 * math.pi) / math.pi, rel=1e-14)
    assert float(K.rho_K(ball(1, 1.0), 1.0)[0]) <= 2 * math.e / math.sqrt(math.pi)
    assert float(K.theta_K_j(ball(1, 1.0), 1.0, 1)[0]) <= 2 * math.e / math.sqrt(math.pi)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.floats(0.3, 3.0), st.floats(0.1, 5.0))
def test_rho_theta_below_closed_form(n, r, R):
    b = ball(n, r)
    rb, tb = K.rho_theta_upper(b.nu, r, n, R)
    assert K.rho_K(b, R)[0] <= rb
    assert K.theta_K_j(b, R, 1)[0] <= tb


def test_rho_theta_nondecreasing_in_R():
    b = ball(2, 1.0)
    Rs = [0.1, 0.5, 1.0, 2.0, 5.0, 20.0]
    rs = [K.rho_K(b, R)[0] for R in Rs]
    ts = [K.theta_K_j(b, R, 2)[0] for R in Rs]
    assert all(a <= c for a, c in zip(rs, rs[1:]))
    assert all(a <= c for a, c in zip(ts, ts[1:]))


def test_boundary_optimum_warns():
    with pytest.warns(K.BoundaryOptimumWarning):
        K.rho_K(ball(2, 1.0), 1e-13)


def test_mc_interval_brackets_exact():
    body = SymbolBody(2, "explicit_sampler", {"sampler": {"shape": "ball", "radius": 1.0}})
    (rlo, rhi), (tlo, thi) = K.rho_theta_interval(body, 1.0, samples=400_000, seed=5)
    assert rlo <= LogReal.from_value(RHO_2) <= rhi
    assert tlo <= LogReal.from_value(THETA_2) <= thi


def test_tau_examples():
    b = ball(1, 1.0)
    pd = K.PairData(1.0, 1.0, [(1.0, 1.0)])
    assert float(K.tau(b, pd)) == pytest.approx(RHO_1 + THETA_1, rel=1e-9)
    assert K.tau(b, K.PairData(0.0, 1.0, [(1.0, 1.0)])).is_zero
    two = K.tau(b, K.PairData(1.0, 1.0, [(1.0, 1.0), (2.0, 2.0)]))
    assert float(two) == pytest.approx((RHO_1 + THETA_1) / 2, rel=1e-9)
    with pytest.raises(ValueError, match="no certified"):
        K.tau(b, K.PairData(1.0, 1.0, []))


def test_tau_linear_in_norm():
    b = ball(2, 1.0)
    t1 = K.tau(b, K.PairData(1.0, 2.0, [(0.1, 0.2)]))
    t3 = K.tau(b, K.PairData(3.0, 2.0, [(0.1, 0.2)]))
    assert abs(t3.log - t1.log - mp.log(3)) < 1e-14


@pytest.mark.parametrize("t,ref", sorted(P_OF_TAU.items()))
def test_p_of_tau_frozen(t, ref):
    assert float(K.p_of_tau(t)) == pytest.approx(ref, rel=1e-8)


def test_p_of_tau_zero_is_half():
    assert float(K.p_of_tau(0.0)) == 0.5


def test_p_of_tau_sandwich_and_monotone():
    taus = np.logspace(-3, 3, 25)
    vals = [K.p_of_tau(float(t)) for t in taus]
    for t, v in zip(taus, vals):
        assert K.remark_lower(float(t)) <= v
        # (1 - tau/T) <= 1 gives p <= erfc(tau)/2
        upper = LogReal(mp.log(mp.erfc(mp.mpf(float(t))) / 2))
        assert v <= upper
        assert LogReal.zero() < v <= LogReal.from_value(0.5)
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_p_of_tau_astronomical_tau():
    for t in (LogReal.from_value(50.0), LogReal(127 * 2 ** 1.5)):
        assert K.remark_lower(t) <= K.p_of_tau(t)


def test_p_sigma_examples():
    b = ball(1, 1.0)
    assert K.p_sigma_K_R(b, 5.0, []) == (LogReal.zero(), False)
    c1 = K.PairData(1.0, 1.0, [(1.0, 1.0)])
    c2 = K.PairData(0.5, 1.0, [(1.0, 1.0)])
    v1, w = K.p_sigma_K_R(b, 5.0, [c1])
    assert w and v1 == K.p_of_tau(K.tau(b, c1))
    v12, _ = K.p_sigma_K_R(b, 5.0, [c1, c2])
    assert v12 == max(v1, K.p_of_tau(K.tau(b, c2)))
    with pytest.raises(ValueError):
        K.p_sigma_K_R(b, 0.5, [c1])


def test_c_sigma_examples():
    assert K.c_sigma_homogeneous([(1.0, 0.0)], 1.0, 2).is_zero
    v = K.c_sigma_homogeneous([(2.0, 0.3)], 1.0, 2)
    assert float(v) == pytest.approx(0.3 / (4 * math.pi * 4), rel=1e-12)
    v = K.c_sigma_homogeneous([(1.0, 1e-3), (2.0, 1e-3)], 1.0, 1)
    assert float(v) == pytest.approx(0.5 * 1e-3 / 2, rel=1e-12)
    with pytest.raises(ValueError):
        K.c_sigma_homogeneous([], 1.0, 1)


def test_theorem3_tau_term_by_term():
    ref = (math.log(20) + 5.5 * math.log(8) - 0.5 * math.lgamma(2) + 2 * math.log(96)
           + 96 * math.sqrt(10))
    assert float(K.theorem3_tau(2, 1.0, 1.0).log) == pytest.approx(ref, rel=1e-14)
    assert K.theorem3_tau(3, 1.0, 2.0) > K.theorem3_tau(3, 1.0, 1.0)
    for n in range(1, 9):
        assert K.theorem3_tau(n, 1.0, 1.0).log <= 127 * n ** 1.5


def test_theorem3_bounds():
    _, p0 = K.theorem3_bounds(2, 1.0, 1.0, 1.0, tau_value=0.0)
    assert float(p0) == pytest.approx(math.exp(-1) / (2 * math.sqrt(math.pi)), rel=1e-14)
    c, p = K.theorem3_bounds(2, 1.0, 1.0, 4 * math.pi ** 2)
    assert mp.isfinite(c.log) and mp.isfinite(p.log) and c.log < -1e100
    for n in range(1, 6):
        t = K.theorem3_tau(n, 1.0, 1.0)
        _, p = K.theorem3_bounds(n, 1.0, 1.0, 1.0)
        assert p == K.remark_lower(t)
        assert p <= K.p_of_tau(t)


def test_corollary_chain():
    vals = []
    for n in range(1, 7):
        v = K.corollary_bound(n, "laplace", 1.0)
        assert mp.log(-v.log) <= 257 * mp.mpf(n) ** 1.5
        assert K.corollary_bound(n, "dtn", 1.0) == v
        vals.append(v)
    assert all(a > b for a, b in zip(vals, vals[1:]))
    rep = K.corollary_chain(2)
    assert all(c["holds"] for c in rep.checks if c["hard"])
    with pytest.raises(ValueError):
        K.corollary_chain(2, "wave")
