"""Acceptance suite: twelve end-to-end checks with fixed seeds and tolerances.

Each ``criterion_k`` returns a :class:`CriterionResult`; :func:`run_suite`
runs a selection and :func:`markdown_table` formats the outcome.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from scipy.special import roots_hermitenorm

from . import constants as K
from . import local_model as lm
from . import simulator as sim
from .logreal import as_logreal
from .spectral_domain import ball

SEED = 20240611


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: str
    threshold: str
    seconds: float = 0.0
    budget: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.number:2d}. {self.title}: {self.measured} "
                f"(need {self.threshold}; {self.seconds:.1f}s of {self.budget:.0f}s)")

    def to_json(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "measured": self.measured, "threshold": self.threshold,
                "seconds": self.seconds, "budget": self.budget}


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.seconds = time.perf_counter() - t0
        res.passed = bool(res.passed and res.seconds <= res.budget)
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def criterion_1() -> CriterionResult:
    """int xi^k H_k(xi) exp(-xi^2/2) = (-1)^k k! sqrt(2 pi), k = 0..8."""
    x, w = roots_hermitenorm(30)
    worst = 0.0
    for k in range(9):
        val = float(np.sum(w * x ** k * lm.hermite(k)(x)))
        ref = (-1) ** k * math.factorial(k) * math.sqrt(2 * math.pi)
        worst = max(worst, abs(val - ref) / abs(ref))
    return CriterionResult(1, "Hermite moment identity", worst <= 1e-10,
                           f"max rel err {worst:.2e}", "<= 1e-10", budget=1)


REF_AXES = {1: [np.linspace(-6.0, 6.0, 241)], 2: [np.linspace(-4.0, 4.0, 33)] * 2}


@_timed
def criterion_2() -> CriterionResult:
    """Truncation errors below the closed-form bounds."""
    rows = []
    ok = True
    for n, i in ((1, 0), (2, 0), (2, 1)):
        q = lm.make_product_spheres_poly(n, i)
        for s in (4.0, 8.0, 48.0 * n):
            eta = 1.0 / (2.0 * s)
            bounds = lm.prop3_bounds(q, 1.0, eta)
            errs = lm.truncation_errors(q, lm.TruncationSpec(1.0, eta), REF_AXES[n])
            good = all(errs[k] <= b for k, b in zip(("sup", "grad", "l2"), bounds))
            ok &= good
            rows.append({"n": n, "i": i, "ratio": s, "ok": good,
                         "log10_err": [float(errs[k].log10) for k in ("sup", "grad", "l2")],
                         "log10_bound": [float(b.log10) for b in bounds]})
    worst = max(max(e - b for e, b in zip(r["log10_err"], r["log10_bound"])) for r in rows)
    return CriterionResult(2, "truncation error bounds", ok,
                           f"9 cases, worst log10(err/bound) = {worst:.2f}",
                           "err <= bound in all 27 comparisons", budget=120,
                           details={"rows": rows})


@_timed
def criterion_3() -> CriterionResult:
    cert, rep = lm.lemma5_certify(2, 0, 0.5, 1024)
    ok = bool(cert.pairs)
    m = rep["verdict"]["margin"]
    return CriterionResult(3, "barrier pair certificate (grid 1024^2)", ok,
                           f"{rep['verdict']['status']}, margins {m.get('boundary', 0):.3g} / "
                           f"{m.get('gradient', 0):.3g}", "certified", budget=60,
                           details=rep)


@_timed
def criterion_4() -> CriterionResult:
    vals = []
    ok = True
    for n in range(1, 5):
        for i in range(n):
            v, b = lm.lemma6_check(n, i)
            vals.append((n, i, v, b))
            ok &= v <= b
    worst = max(v / b for _, _, v, b in vals)
    return CriterionResult(4, "barrier L2 norm bound, n <= 4", ok,
                           f"max norm/bound {worst:.4f}", "<= 1", budget=60)


@_timed
def criterion_5() -> CriterionResult:
    eta = 1.0 / 96.0
    cert, rep = lm.corollary4_certify(2, 0, 1.0, eta, 1024)
    ok = bool(cert.pairs) and rep["loops_inside"] == 2 and rep["topology_ok"]
    return CriterionResult(5, "band-limited barrier at eta = c/96", ok,
                           f"{rep['verdict']['status']}, {rep['loops_inside']} loops inside",
                           "certified and exactly 2 loops", budget=120, details=rep)


@_timed
def criterion_6() -> CriterionResult:
    e = sim.build_ensemble(1, 100)
    recs = sim.run_trials(e, 2000, SEED)
    z = np.array([r.b0 for r in recs], dtype=float)
    mean, se = z.mean(), z.std(ddof=1) / math.sqrt(len(z))
    ref = sim.kac_rice_zeros(e)
    return CriterionResult(6, "Kac-Rice zero count, n = 1, L = 100", abs(mean - ref) <= 3 * se,
                           f"mean {mean:.4f} +- {se:.4f} vs {ref:.4f}", "within 3 stderr",
                           budget=60)


@_timed
def criterion_7() -> CriterionResult:
    N, ratio = sim.weyl_count(2, 1e4)
    rel = abs(ratio - math.pi) / math.pi
    return CriterionResult(7, "lattice count, n = 2, L = 1e4", rel <= 0.005,
                           f"N_L = {N}, N_L/L = {ratio:.5f}, rel dev {rel:.2e}", "<= 0.5%",
                           budget=1)


@_timed
def criterion_8() -> CriterionResult:
    e = sim.build_ensemble(2, 400)
    (sup, sup_se), grads = sim.empirical_c1(e, [math.pi, math.pi], 1.0, 500, seed=SEED)
    b = ball(2, 1.0)
    rho = float(K.rho_K(b, 1.0)[0])
    thetas = [float(K.theta_K_j(b, 1.0, j)[0]) for j in (1, 2)]
    ok = sup <= rho and all(g[0] <= t for g, t in zip(grads, thetas))
    gtxt = ", ".join(f"{g[0]:.3f}<={t:.3f}" for g, t in zip(grads, thetas))
    return CriterionResult(8, "sup-norm means vs rho/theta, L = 400", ok,
                           f"sup {sup:.3f}<={rho:.3f}; grad {gtxt}", "mean <= constant",
                           budget=300)


def local_model_field():
    """``q_{0,1}`` at ``eta = 1/8`` and the measurement radius ``sqrt(5)/eta``."""
    eta = 1.0 / 8.0
    f = lm.truncate(lm.make_product_spheres_poly(2, 0), lm.TruncationSpec(1.0, eta))
    return f, math.sqrt(5.0) / eta


@_timed
def criterion_9() -> CriterionResult:
    f, R = local_model_field()
    res = [sim.implement_local_model(f, sim.build_ensemble(2, L), [math.pi, math.pi], R)
           for L in (100, 400, 1600)]
    errs = [r.conv_error for r in res]
    dec = all(a > b for a, b in zip(errs, errs[1:]))
    rel = abs(res[-1].l2_norm - res[-1].f_l2_norm) / res[-1].f_l2_norm
    return CriterionResult(9, "local model implemented in U_L", dec and rel <= 0.05,
                           "conv_error " + " > ".join(f"{x:.2e}" for x in errs)
                           + f"; norm rel dev {rel:.1e}",
                           "strictly decreasing; norm within 5%", budget=300,
                           details={"loops": [r.loops_in_ball for r in res]})


@_timed
def criterion_10() -> CriterionResult:
    ok = True
    worst = []
    for n in range(1, 7):
        n15 = mp.mpf(n) ** 1.5
        t = K.theorem3_tau(n, 1.0, 1.0)
        cb = K.corollary_bound(n, "laplace", 1.0)
        ll = mp.log(-cb.log)
        ok &= (t.log <= 127 * n15) and (ll <= 257 * n15)
        worst.append(float(ll / (257 * n15)))
    return CriterionResult(10, "constants chain, n = 1..6", bool(ok),
                           f"max loglog ratio {max(worst):.4f}", "tau and bound inequalities",
                           budget=1)


def _prob_runs(trials=500):
    out = {}
    for L in (200, 400):
        e = sim.build_ensemble(2, L)
        out[L] = sim.estimate_prob_sigma(e, [math.pi, math.pi], 10.0, "two_loops", trials,
                                         seed=SEED + L)
    return out


@_timed
def criterion_11() -> CriterionResult:
    runs = _prob_runs()
    (p1, s1), (p2, s2) = runs[200], runs[400]
    _, p_lower = K.theorem3_bounds(2, 1.0, 1.0, 4 * math.pi ** 2)
    agree = abs(p1 - p2) <= 3 * math.hypot(s1, s2)
    dom = all(as_logreal(p) >= p_lower for p in (p1, p2))
    ok = p1 > 0 and p2 > 0 and agree and dom
    return CriterionResult(11, "two-loop probability at R = 10", ok,
                           f"p(200) = {p1:.3f}+-{s1:.3f}, p(400) = {p2:.3f}+-{s2:.3f}",
                           "positive, within 3 combined stderr, >= p_lower", budget=900)


@_timed
def criterion_12() -> CriterionResult:
    means = {}
    for L in (200, 400):
        means[L] = sim.estimate_b0(sim.build_ensemble(2, L), 200, seed=SEED + L)
    a, b = means[200][0], means[400][0]
    rel = abs(a - b) / max(a, b)
    bound = K.corollary_bound(2, "laplace", 4 * math.pi ** 2)
    ok = rel <= 0.2 and all(as_logreal(x) > bound for x in (a, b))
    return CriterionResult(12, "component count per unit L", ok,
                           f"b0/L = {a:.4f}, {b:.4f}; rel diff {rel:.3f}",
                           "within 20%, above the explicit lower bound", budget=900)


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 13)}


def run_suite(which=None, echo=None):
    """Run the selected criteria (all by default); ``echo`` receives each line."""
    out = []
    for k in (which or sorted(CRITERIA)):
        res = CRITERIA[k]()
        if echo:
            echo(res.line())
        out.append(res)
    return out


def markdown_table(results) -> str:
    rows = ["| # | check | measured | requirement | time (s) | result |",
            "|---|---|---|---|---|---|"]
    for r in results:
        rows.append(f"| {r.number} | {r.title} | {r.measured} | {r.threshold} | "
                    f"{r.seconds:.1f} | {'pass' if r.passed else 'FAIL'} |")
    return "\n".join(rows) + "\n"
