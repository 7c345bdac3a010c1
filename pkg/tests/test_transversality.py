import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodal_lab import local_model as lm
from nodal_lab.transversality import (GridField, check_pair, grid_field_from_function,
                                      pair_frontier, perturbation_stability)

BALL1 = {"type": "ball", "radius": 1.0, "center": [0.0, 0.0]}


def _axes(half, m):
    ax = np.linspace(-half, half, m)
    return [ax, ax]


def _const_one(m=41):
    ax = _axes(1.2, m)
    return grid_field_from_function(lambda p: np.ones(p.shape[:-1]),
                                    lambda p: np.zeros(p.shape), ax, 0.0, 0.0, BALL1)


def _plane(m=41, half=1.2):
    # f(z) = z_1, |grad f| = 1, Hessian 0
    ax = _axes(half, m)
    return grid_field_from_function(lambda p: p[..., 0],
                                    lambda p: np.stack([np.ones(p.shape[:-1]),
                                                        np.zeros(p.shape[:-1])], -1),
                                    ax, 1.0, 0.0, BALL1)


def _barrier(grid=129):
    # exact barrier on |z| <= sqrt 5 through the public certifier path
    q = lm.make_product_spheres_poly(2, 0)
    r = math.sqrt(5.0)
    ax = lm._window_axes(r, grid)
    pts = np.stack(np.meshgrid(*ax, indexing="ij"), -1)
    wide = lm.truncate(q, lm.TruncationSpec(1.0, 1.0 / 64.0))
    lv, lg = wide.derivative_bounds_scaled()
    return GridField(ax, q(pts), q.gradient(pts), lv, lg,
                     {"type": "ball", "radius": r, "center": [0.0, 0.0]})


def test_constant_field_is_certified():
    v = check_pair(_const_one(), 0.5, 1.0)
    assert v.certified and v.margin["boundary"] == pytest.approx(0.5)
    # |f| <= delta never happens, so condition 2 is vacuous
    assert v.margin["gradient"] == math.inf


def test_linear_field_box_window():
    ax = [np.linspace(-1.1, 1.1, 45)]
    f = grid_field_from_function(lambda p: p[..., 0], lambda p: np.ones(p.shape), ax,
                                 1.0, 0.0, {"type": "box", "bounds": [[-1.0, 1.0]]})
    assert check_pair(f, 0.5, 0.9).certified
    assert check_pair(f, 0.5, 1.0).status == "refuted"


def test_refuted_pair_has_witness():
    v = check_pair(_plane(), 0.1, 2.0)
    assert v.status == "refuted"
    w = v.witness
    assert abs(w["value"]) <= 0.1 and w["grad_norm"] <= 2.0
    assert len(w["location"]) == 2


def test_boundary_refutation():
    # f = z_1 vanishes on the unit circle, so condition 1 fails for any delta > 0
    v = check_pair(_plane(), 0.05, 0.5)
    assert v.status == "refuted" and "boundary" in v.witness["reason"]


def test_grid_must_cover_window():
    ax = _axes(0.5, 21)
    f = grid_field_from_function(lambda p: np.ones(p.shape[:-1]), lambda p: np.zeros(p.shape),
                                 ax, 0.0, 0.0, BALL1)
    with pytest.raises(ValueError):
        check_pair(f, 0.5, 0.5)


def test_rejects_bad_inputs():
    ax = _axes(1.2, 11)
    with pytest.raises(ValueError):
        GridField(ax, np.zeros((11, 11)), None, 1.0, 1.0, BALL1)
    with pytest.raises(ValueError):
        GridField(ax, np.zeros((11, 10)), np.zeros((11, 11, 2)), 1.0, 1.0, BALL1)
    with pytest.raises(ValueError):
        GridField([ax[0], np.linspace(-1.2, 1.2, 21)], np.zeros((11, 21)),
                  np.zeros((11, 21, 2)), 1.0, 1.0, BALL1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.4), st.floats(0.01, 0.5), st.floats(0.5, 1.0), st.floats(0.5, 1.0))
def test_monotone_in_delta_and_epsilon(delta, eps, a, b):
    f = _barrier(65)
    if check_pair(f, delta * math.exp(-2.5), eps * math.exp(-2.5)).certified:
        assert check_pair(f, a * delta * math.exp(-2.5), b * eps * math.exp(-2.5)).certified


def test_refinement_never_flips_certified_to_refuted():
    pair = (0.5 * math.exp(-2.5), 0.75 * math.exp(-2.5))
    seen_cert = False
    for g in (65, 129, 257, 513):
        st_ = check_pair(_barrier(g), *pair).status
        if seen_cert:
            assert st_ != "refuted"
        seen_cert |= st_ == "certified"
    assert seen_cert


def test_frontier_antitone_and_sharp_for_plane():
    f = _plane(201, 1.1)
    fr = pair_frontier(f, [0.0, 0.05, 0.1], iterations=20)
    # delta >= min boundary |f| = 0 gives eps_max = 0 for the plane on a ball
    assert all(e == 0.0 for _, e in fr[1:])
    box = {"type": "box", "bounds": [[0.2, 1.0], [-1.0, 1.0]]}
    f = grid_field_from_function(lambda p: p[..., 0],
                                 lambda p: np.stack([np.ones(p.shape[:-1]),
                                                     np.zeros(p.shape[:-1])], -1),
                                 _axes(1.1, 221), 1.0, 0.0, box)
    fr = pair_frontier(f, [0.01, 0.05, 0.1, 0.15], iterations=24)
    eps = [e for _, e in fr]
    assert all(x >= y for x, y in zip(eps, eps[1:]))
    # Hessian slack is zero, so the sup of admissible eps is |grad f| = 1
    assert eps[0] == pytest.approx(1.0, abs=1e-5)


def test_frontier_barrier_is_antitone():
    f = _barrier(513)
    deltas = np.array([0.1, 0.3, 0.5, 0.7]) * math.exp(-2.5)
    eps = [e for _, e in pair_frontier(f, deltas)]
    assert all(x >= y for x, y in zip(eps, eps[1:]))
    # the frontier dominates the closed-form pair (delta e^-5/2, (2 - delta) e^-5/2 / 2)
    for d, e in zip((0.1, 0.3, 0.5, 0.7), eps):
        assert e >= (2 - d) / 2 * math.exp(-2.5)


def test_binary_and_json_roundtrip():
    f = _barrier(33)
    g = GridField.from_bytes(f.to_bytes())
    assert np.array_equal(g.values, f.values) and np.array_equal(g.gradients, f.gradients)
    assert g.window == f.window and g.lip_value == f.lip_value and g.lip_grad == f.lip_grad
    h = GridField.from_json(f.to_json())
    assert np.array_equal(h.values, f.values)
    with pytest.raises(ValueError):
        GridField.from_bytes(b"XXXX" + f.to_bytes()[4:])


def test_torus_window_has_no_boundary_condition():
    m = 64
    ax = np.arange(m) * 2 * np.pi / m
    f = grid_field_from_function(lambda p: np.sin(p[..., 0]),
                                 lambda p: np.stack([np.cos(p[..., 0]), 0 * p[..., 1]], -1),
                                 [ax, ax], 1.0, 1.0, {"type": "torus"})
    assert f.covers_window()
    v = check_pair(f, 0.05, 0.5)
    assert v.certified and v.margin["boundary"] == math.inf
    shifted = GridField([ax + 0.1, ax], f.values, f.gradients, 1.0, 1.0, {"type": "torus"})
    assert not shifted.covers_window()


def test_perturbation_within_pair_keeps_topology():
    f = _barrier(257)
    pair = (0.5 * math.exp(-2.5), 0.75 * math.exp(-2.5))
    res = perturbation_stability(f, pair, trials=20, seed=1)
    assert res["base_loops"] == 2 and res["stable"]
    res0 = perturbation_stability(f, pair, trials=3, seed=1, scale=0.0)
    assert res0["counts"] == [2, 2, 2]


def test_corollary4_pair_survives_100_perturbations():
    _, rep, f, _ = lm.corollary4_certify(2, 0, 1.0, 1.0 / 96.0, 384, return_field=True)
    res = perturbation_stability(f, tuple(rep["pair"]), trials=100, seed=7)
    assert res["base_loops"] == 2
    assert res["counts"] == [2] * 100
