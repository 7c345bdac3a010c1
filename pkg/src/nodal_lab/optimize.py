"""Deterministic 1-D minimization: coarse grid bracket, then golden section."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class MinResult:
    x: float
    fx: object  # float or mpmath.mpf, whatever the objective returns
    at_boundary: bool
    evaluations: int


def golden_section(f: Callable, a: float, b: float, xtol: float,
                   maxiter: int = 400):
    """Golden-section search for a minimum of a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, f(x), n_evals)``.  The bracket is shrunk until its width
    drops below ``xtol``.
    """
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    for _ in range(maxiter):
        if abs(b - a) <= xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        evals += 1
    if fc <= fd:
        return c, fc, evals
    return d, fd, evals


def grid_golden_minimize(f: Callable, lo: float, hi: float, n_grid: int = 200,
                         rtol: float = 1e-10) -> MinResult:
    """Minimize ``f`` on ``[lo, hi]``.

    ``f`` is first sampled on ``n_grid`` equally spaced points; the best
    sample and its two neighbours bracket the refinement, which runs golden
    section until the bracket width is ``rtol`` times the scale of the
    variable.  When the best sample sits at an end of the interval the
    minimizer is reported with ``at_boundary=True`` (monotone tail).

    Callers that want a search in ``log t`` pass the log-transformed
    objective and bounds.
    """
    xs = np.linspace(lo, hi, n_grid)
    vals = [f(float(x)) for x in xs]
    k = int(np.argmin(np.array([float(v) for v in vals])))
    # argmin over floats may tie on values that only differ past double
    # precision (mpf objectives); resolve ties with the exact values
    best = vals[k]
    for j, v in enumerate(vals):
        if v < best:
            k, best = j, v
    if k == 0 or k == n_grid - 1:
        return MinResult(float(xs[k]), vals[k], True, n_grid)
    a, b = float(xs[k - 1]), float(xs[k + 1])
    xtol = rtol * max(1.0, abs(float(xs[k])))
    x, fx, ne = golden_section(f, a, b, xtol)
    if vals[k] < fx:
        x, fx = float(xs[k]), vals[k]
    return MinResult(float(x), fx, False, n_grid + ne)
