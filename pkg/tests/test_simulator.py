import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodal_lab import simulator as sim
from nodal_lab.acceptance import local_model_field


def test_ensemble_counts():
    assert sim.build_ensemble(1, 100).N_L == 21
    # lattice points in the disc of radius 10, counted independently
    k = np.arange(-10, 11)
    ref = int(np.sum(k[:, None] ** 2 + k[None, :] ** 2 <= 100))
    assert sim.build_ensemble(2, 100).N_L == ref == 317
    e = sim.build_ensemble(2, 50)
    m = e.modes
    assert len({tuple(r) for r in m}) == len(m) == e.N_L
    with pytest.raises(ValueError):
        sim.build_ensemble(3, 10)


@pytest.mark.parametrize("L", [1e3, 1e4])
def test_weyl_law(L):
    N, ratio = sim.weyl_count(2, L)
    assert abs(N / L - math.pi) <= 5 / math.sqrt(L)


def test_coefficient_variance():
    e = sim.build_ensemble(2, 30)
    c = np.concatenate([sim.sample_section(e, 4, t).coeffs for t in range(1100)])
    assert len(c) >= 1e5
    assert c.var() == pytest.approx(0.5, abs=0.01)
    norms = [sim.sample_section(e, 5, t).l2_norm() ** 2 for t in range(2000)]
    assert np.mean(norms) == pytest.approx(e.N_L / 2, rel=0.02)


def test_seeding_is_per_trial():
    e = sim.build_ensemble(2, 40)
    a = sim.sample_section(e, 9, 3)
    assert np.array_equal(a.coeffs, sim.sample_section(e, 9, 3).coeffs)
    assert not np.array_equal(a.coeffs, sim.sample_section(e, 9, 4).coeffs)
    assert not np.array_equal(a.coeffs, sim.sample_section(e, 9, 3, attempt=1).coeffs)


def test_single_mode_section():
    e = sim.build_ensemble(1, 1)
    # half-mode k = 1 only; a_cos = 1 gives cos(x)/sqrt(pi)
    s = sim.RandomSection(e, np.array([0.0, 1.0, 0.0]))
    x = np.linspace(0, 2 * np.pi, 17)[:, None]
    v, g = sim.eval_points(s, x)
    assert np.allclose(v, np.cos(x[:, 0]) / math.sqrt(math.pi), atol=1e-14)
    assert np.allclose(g[:, 0], -np.sin(x[:, 0]) / math.sqrt(math.pi), atol=1e-14)


def test_basis_is_orthonormal():
    e = sim.build_ensemble(2, 8)
    G = 32
    ax = 2 * np.pi * np.arange(G) / G
    cols = []
    for j in range(e.N_L):
        c = np.zeros(e.N_L)
        c[j] = 1.0
        v, _ = sim.eval_on_axes(sim.RandomSection(e, c), [ax, ax], with_gradient=False)
        cols.append(v.reshape(-1))
    B = np.array(cols)
    gram = B @ B.T * (2 * np.pi / G) ** 2
    assert np.allclose(gram, np.eye(e.N_L), atol=1e-12)


def test_three_evaluation_routes_agree():
    e = sim.build_ensemble(2, 60)
    s = sim.sample_section(e, 1, 0)
    G = 64
    fld = sim.eval_section(s, G)
    ax = fld.axes[0]
    va, ga = sim.eval_on_axes(s, [ax, ax])
    assert np.allclose(fld.values, va, atol=1e-11) and np.allclose(fld.gradients, ga, atol=1e-10)
    rng = np.random.default_rng(0)
    idx = rng.integers(0, G, size=(30, 2))
    vp, gp = sim.eval_points(s, ax[idx])
    assert np.allclose(vp, fld.values[idx[:, 0], idx[:, 1]], atol=1e-11)
    assert np.allclose(gp, fld.gradients[idx[:, 0], idx[:, 1]], atol=1e-10)


def test_gradient_against_central_differences():
    e = sim.build_ensemble(2, 40)
    s = sim.sample_section(e, 2, 0)
    pts = np.random.default_rng(1).uniform(0, 2 * np.pi, size=(25, 2))
    _, g = sim.eval_points(s, pts)
    h = 1e-4
    for j in range(2):
        d = np.zeros(2)
        d[j] = h
        fd = (sim.eval_points(s, pts + d)[0] - sim.eval_points(s, pts - d)[0]) / (2 * h)
        assert np.allclose(g[:, j], fd, atol=1e-5 * max(1, np.abs(g).max()))


def test_lipschitz_bounds_dominate_gradients():
    e = sim.build_ensemble(2, 40)
    s = sim.sample_section(e, 3, 0)
    lv, lg = s.lipschitz()
    fld = sim.eval_section(s, 128)
    assert np.sqrt(np.sum(fld.gradients ** 2, -1)).max() <= lv


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.lists(st.integers(-3, 3), min_size=2, max_size=2),
       st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_periodicity(seed, shift, x, y):
    e = sim.build_ensemble(2, 20)
    s = sim.sample_section(e, seed)
    p = np.array([[x, y]])
    v0, g0 = sim.eval_points(s, p)
    v1, g1 = sim.eval_points(s, p + 2 * np.pi * np.array(shift))
    assert np.allclose(v0, v1, atol=1e-9) and np.allclose(g0, g1, atol=1e-8)


def test_kernel_diagonal_and_reproducing_property():
    e = sim.build_ensemble(2, 30)
    assert sim.spectral_kernel(e, [0.3, 1.0], [0.3, 1.0]) == pytest.approx(e.N_L / (2 * np.pi) ** 2)
    s = sim.sample_section(e, 6)
    y = np.array([1.1, 4.2])
    G = 64
    ax = 2 * np.pi * np.arange(G) / G
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    v, _ = sim.eval_on_axes(s, [ax, ax], with_gradient=False)
    d = np.stack([X - y[0], Y - y[1]], -1) @ e.half_modes.T.astype(float)
    ker = (1 + 2 * np.cos(d).sum(-1)) / (2 * np.pi) ** 2
    repro = np.sum(ker * v) * (2 * np.pi / G) ** 2
    assert repro == pytest.approx(float(sim.eval_points(s, y)[0][0]), abs=1e-10)


def test_projection_roundtrip():
    e = sim.build_ensemble(2, 50)
    s = sim.sample_section(e, 8)
    fld = sim.eval_section(s, 64, with_gradient=False)
    back = sim.section_from_function_values(e, fld.values)
    assert np.allclose(back.coeffs, s.coeffs, atol=1e-12)


def test_grid_preconditions():
    e = sim.build_ensemble(2, 400)
    s = sim.sample_section(e, 0)
    with pytest.raises(ValueError):
        sim.eval_section(s, 128)
    assert sim.default_grid(e) == 512
    assert sim.default_grid(sim.build_ensemble(1, 100)) == 4096


def test_one_dimensional_zero_counts():
    e = sim.build_ensemble(1, 400)
    recs = sim.run_trials(e, 400, seed=11)
    zs = np.array([r.b0 for r in recs])
    assert np.all(zs % 2 == 0)
    assert zs.mean() == pytest.approx(sim.kac_rice_zeros(e), abs=4 * zs.std() / 20)


def test_parity_and_thread_independence():
    e = sim.build_ensemble(2, 120)
    a = sim.run_trials(e, 6, seed=3, R=8.0, c1=True, threads=1)
    b = sim.run_trials(e, 6, seed=3, R=8.0, c1=True, threads=3)
    assert [r.to_json() for r in a] == [r.to_json() for r in b]
    s = sim.sample_section(e, 3, 0)
    fa = sim.eval_section(s, 256)
    fb = sim.eval_section(-s, 256)
    sa = sim.nodal_extract(fa, 2, balls=[((np.pi, np.pi), 1.0)])
    sb = sim.nodal_extract(fb, 2, balls=[((np.pi, np.pi), 1.0)])
    assert sa.b0 == sb.b0 and sa.ball_hits == sb.ball_hits


def test_refinement_keeps_b0():
    e = sim.build_ensemble(2, 200)
    a = sim.run_trials(e, 50, seed=21, grid=512)
    b = sim.run_trials(e, 50, seed=21, grid=1024)
    assert [r.b0 for r in a] == [r.b0 for r in b]


def test_translation_invariance_of_loop_probability():
    e = sim.build_ensemble(2, 400)
    p1, s1 = sim.estimate_prob_sigma(e, [np.pi, np.pi], 10.0, "one_loop", 300, seed=1)
    p2, s2 = sim.estimate_prob_sigma(e, [1.0, 2.0], 10.0, "one_loop", 300, seed=2)
    assert abs(p1 - p2) <= 4 * math.hypot(s1, s2)


def test_loop_probability_monotone_in_radius():
    e = sim.build_ensemble(2, 400)
    res = [sim.estimate_prob_sigma(e, [np.pi, np.pi], R, "one_loop", 200, seed=5)
           for R in (0.5, 4.0, 8.0, 16.0)]
    ps = [p for p, _ in res]
    assert ps[0] == 0.0
    for (a, sa), (b, sb) in zip(res, res[1:]):
        assert a <= b + 2 * math.hypot(sa, sb)
    with pytest.raises(ValueError):
        sim.estimate_prob_sigma(e, [0, 0], 1.0, "three_loops", 10)


def test_empirical_c1_grows_with_radius():
    e = sim.build_ensemble(2, 400)
    (m1, _), g1 = sim.empirical_c1(e, [np.pi, np.pi], 2.0, 100, seed=4)
    (m2, _), g2 = sim.empirical_c1(e, [np.pi, np.pi], 4.0, 100, seed=4)
    assert m2 >= m1 and all(b[0] >= a[0] for a, b in zip(g1, g2))


def test_chart_cutoff_profile():
    r = np.linspace(0, 4, 401)
    c = sim.chart_cutoff(r)
    assert np.all(c[r <= np.pi / 2] == 1.0) and np.all(c[r >= 0.95 * np.pi] == 0.0)
    assert np.all(np.diff(c) <= 1e-15)


def test_local_model_two_loops_at_large_L():
    f, R = local_model_field()
    res = sim.implement_local_model(f, sim.build_ensemble(2, 1600), [np.pi, np.pi], R)
    assert res.loops_in_ball == 2
    assert res.conv_error < 1e-4
    assert res.l2_norm == pytest.approx(res.f_l2_norm, rel=1e-3)


def test_local_model_preconditions():
    f, R = local_model_field()
    e = sim.build_ensemble(2, 400)
    with pytest.raises(ValueError):
        sim.implement_local_model(f, e, [np.pi, np.pi], R, grid=64)
    with pytest.raises(ValueError):
        sim.implement_local_model(f, sim.build_ensemble(2, 25), [np.pi, np.pi], R)
    with pytest.raises(ValueError):
        sim.implement_local_model(f, sim.build_ensemble(1, 400), [np.pi], R)


@pytest.mark.parametrize("eps", [1e-9, -1e-9, 1e-3, -1e-3])
@pytest.mark.parametrize("d", [0.0123, 0.3])
def test_near_degenerate_saddles_are_separated(eps, d):
    # cos(x - d) + cos(y - 0.7 d) + eps: two saddles of value eps, and for
    # eps != 0 the nodal set is one contractible loop
    e = sim.build_ensemble(2, 1)
    G = 64
    ax = 2 * np.pi * np.arange(G) / G
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    s = sim.section_from_function_values(e, np.cos(X - d) + np.cos(Y - 0.7 * d) + eps)
    for g in (16, 32, 64):
        ct = sim.torus_contour(s, g)
        assert ct.n_components == 1 and ct.closed.all()
    v, gr = sim._fft_fields(s, 16)
    axes = [2 * np.pi * np.arange(16) / 16] * 2
    _, k = sim.separate_critical_values(s, v, axes, gr, periodic=True)
    assert k == 2


def test_hessian_against_gradient_differences():
    e = sim.build_ensemble(2, 30)
    s = sim.sample_section(e, 12)
    pts = np.random.default_rng(4).uniform(0, 2 * np.pi, size=(10, 2))
    v, g, H = sim.eval_hessian(s, pts)
    v2, g2 = sim.eval_points(s, pts)
    assert np.allclose(v, v2) and np.allclose(g, g2)
    h = 1e-5
    for j in range(2):
        d = np.zeros(2)
        d[j] = h
        fd = (sim.eval_points(s, pts + d)[1] - sim.eval_points(s, pts - d)[1]) / (2 * h)
        assert np.allclose(H[:, :, j], fd, atol=1e-5 * np.abs(H).max())


def _four_bumps():
    # cos 2x + cos 2y - 3/2: one small loop around each of the four maxima
    e = sim.build_ensemble(2, 4)
    G = 32
    ax = 2 * np.pi * np.arange(G) / G
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    s = sim.section_from_function_values(e, np.cos(2 * X) + np.cos(2 * Y) - 1.5)
    return sim.torus_contour(s, 128)


def test_contractible_loops_and_sigma_ball_counts():
    ct = _four_bumps()
    loops = sim.contractible_loops(ct)
    assert len(loops) == 4
    cen = sorted(tuple(np.round(np.mod(c + 0.1, 2 * np.pi) - 0.1, 6)) for c, _ in loops)
    assert np.allclose(cen, [(0, 0), (0, np.pi), (np.pi, 0), (np.pi, np.pi)], atol=1e-6)
    assert sim.count_sigma_balls(ct, 0.3, "one_loop") == 0
    assert sim.count_sigma_balls(ct, 0.6, "one_loop") == 4
    # 2r > pi: only diagonal neighbours stay disjoint
    assert sim.count_sigma_balls(ct, 1.6, "one_loop") == 2
    # loops have radius 1/2, so a pair needs pi/2 + 1/2
    assert sim.count_sigma_balls(ct, 2.0, "two_loops") == 0
    assert sim.count_sigma_balls(ct, 2.2, "two_loops") == 1
    with pytest.raises(ValueError):
        sim.count_sigma_balls(ct, 1.0, "three_loops")


def test_non_contractible_lines_are_not_loops():
    e = sim.build_ensemble(2, 1)
    s = sim.RandomSection(e, np.array([0.0, 1.0, 0.0, 0.0, 0.0]))
    ct = sim.torus_contour(s, 64)
    assert ct.n_components == 2 and ct.closed.all()
    assert sim.contractible_loops(ct) == []


def test_n_sigma_estimate_is_consistent_with_probability():
    e = sim.build_ensemble(2, 200)
    m1, se1 = sim.estimate_n_sigma(e, 10.0, "one_loop", 20, seed=3)
    m2, _ = sim.estimate_n_sigma(e, 10.0, "two_loops", 20, seed=3)
    assert m1 > 0 and se1 > 0
    # a ball holding two loops holds one, and two-loop balls are larger
    assert m2 <= m1
    a, _ = sim.estimate_n_sigma(e, 10.0, "one_loop", 20, seed=3, threads=2)
    assert a == m1


def test_rescaled_kernel_converges_to_ball_fourier_transform():
    from scipy.special import j1

    zs = np.random.default_rng(0).uniform(-3, 3, size=(20, 2))
    r = np.linalg.norm(zs, axis=1)
    limit = j1(r) / (2 * np.pi * r)
    errs = []
    for L in (25, 400, 6400):
        e = sim.build_ensemble(2, L)
        k = np.array([sim.spectral_kernel(e, z / math.sqrt(L), [0.0, 0.0]) for z in zs]) / L
        errs.append(float(np.max(np.abs(k - limit))))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-4
