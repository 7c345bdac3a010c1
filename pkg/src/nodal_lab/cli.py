"""``nodal-lab`` command line.

Exit codes: 0 success, 2 certification or acceptance failure, 3 precondition
error, 64 malformed flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .logreal import LogReal

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CERT, EXIT_PRE, EXIT_USAGE = 0, 2, 3, 64

log = logging.getLogger("nodal_lab")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with 64 on malformed flags."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


# ---------------------------------------------------------------------------
# output helpers

def jsonable(x):
    """Convert LogReals, numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(x, LogReal):
        return x.to_json()
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return x


def atomic_write(path: str, data, binary: bool = False):
    """Write via a temporary file in the target directory and ``os.replace``."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb" if binary else "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def emit(args, record, text=None):
    """Embed config and schema version; write to ``--out`` and/or stdout."""
    record = {"schema_version": SCHEMA_VERSION, "command": args.command,
              "config": resolved_config(args), **record}
    payload = dumps(record)
    if getattr(args, "out", None):
        atomic_write(args.out, payload)
    if getattr(args, "json", False) or not text:
        if not getattr(args, "out", None) or getattr(args, "json", False):
            sys.stdout.write(payload)
    else:
        sys.stdout.write(text.rstrip() + "\n")
    return record


def resolved_config(args) -> dict:
    skip = {"func", "json", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------------------
# subcommands

def cmd_constants(args):
    from . import constants as K
    from .spectral_domain import ball

    n, c, d = args.n, args.c, args.d
    R = args.R if args.R is not None else 48 * math.sqrt(5.0) * n / c
    body = ball(n, d)
    rho, t_rho = K.rho_K(body, R)
    theta, t_theta = K.theta_K_j(body, R, 1)
    tau3 = K.theorem3_tau(n, c, d)
    c_lower, p_lower = K.theorem3_bounds(n, c, d, args.vol)
    chain = K.corollary_chain(n, "laplace", args.vol)
    rec = {"rho": rho, "theta": theta, "R": R, "t_rho": t_rho, "t_theta": t_theta,
           "tau_thm3": tau3, "p_lower": p_lower, "c_lower": c_lower,
           "chain_checks": chain.checks}
    txt = "\n".join(f"{k}: log10 = {jsonable(v.to_json())['log10']}"
                    for k, v in rec.items() if isinstance(v, LogReal))
    emit(args, rec, txt)
    hard_fail = [ch for ch in chain.checks if ch["hard"] and not ch["holds"]]
    return EXIT_CERT if hard_fail else EXIT_OK


def _loops_svg(ct, radius, path, title):
    from .svg import render_contour

    lim = radius * 1.05
    atomic_write(path, render_contour(ct, ((-lim, lim), (-lim, lim)),
                                      [((0.0, 0.0), radius)], title))


def cmd_localmodel(args):
    from .local_model import corollary4_certify

    cert, rep, f, ct = corollary4_certify(args.n, args.i, args.c, args.eta, args.grid,
                                          return_field=True)
    if args.svg:
        _loops_svg(ct, f.window["radius"], args.svg, f"q_{args.i},c nodal set")
    ok = bool(cert.pairs) and rep["topology_ok"]
    emit(args, {"certificate": cert.to_json(), "report": rep, "certified": ok},
         f"{rep['verdict']['status']}: {rep['loops_inside']} loops inside W, "
         f"l2 = {rep['l2_norm']:.6g}")
    return EXIT_OK if ok else EXIT_CERT


def cmd_certify(args):
    from .local_model import corollary4_certify, lemma5_certify
    from .transversality import GridField, check_pair

    if args.field:
        with open(args.field, "rb") as fh:
            f = GridField.from_bytes(fh.read())
        if args.delta is None or args.epsilon is None:
            raise ValueError("--field needs --delta and --epsilon")
        v = check_pair(f, args.delta, args.epsilon)
        emit(args, {"verdict": v.to_json(), "certified": v.certified}, v.status)
        return EXIT_OK if v.certified else EXIT_CERT
    if args.builtin == "lemma5":
        delta = 0.5 if args.delta is None else args.delta
        cert, rep = lemma5_certify(args.n, args.i, delta, args.grid)
        ok = bool(cert.pairs)
    elif args.builtin == "corollary4":
        eta = args.eta if args.eta is not None else args.c / (48.0 * args.n)
        cert, rep = corollary4_certify(args.n, args.i, args.c, eta, args.grid)
        ok = bool(cert.pairs) and rep["topology_ok"]
    else:
        raise UsageError("give --builtin or --field")
    emit(args, {"certificate": cert.to_json(), "report": rep, "certified": ok},
         f"{rep['verdict']['status']} pair {rep['pair']}")
    return EXIT_OK if ok else EXIT_CERT


def _trial_svg(e, seed, t, grid, x0, rad, path):
    from .simulator import sample_section, torus_contour
    from .svg import render_contour

    ct = torus_contour(sample_section(e, seed, t), grid)
    atomic_write(path, render_contour(ct, ((0, 2 * math.pi), (0, 2 * math.pi)),
                                      [(x0, rad)], f"trial {t}"))


def cmd_simulate(args):
    from . import simulator as sim

    e = sim.build_ensemble(args.n, args.L)
    grid = args.grid or sim.default_grid(e)
    x0 = args.x0 if args.x0 else [math.pi] * args.n
    if len(x0) != args.n:
        raise ValueError("--x0 needs n coordinates")
    recs = sim.run_trials(e, args.trials, args.seed, grid, x0=x0, R=args.R,
                          want_b0=True, c1=True, threads=args.threads)
    a = e.L ** (-e.n / 4)
    b = e.L ** (-(e.n + 2) / 4)
    per = [{"b0": r.b0, "n_loops_in_ball": r.n_loops_in_ball,
            "sup_norm": r.sup_norm * a,
            "grad_sup": [float(g) * b for g in np.atleast_1d(r.grad_sup)]} for r in recs]
    cols = {"b0": [p["b0"] for p in per],
            "b0_normalized": [p["b0"] / e.L ** (e.n / 2) for p in per],
            "n_loops_in_ball": [p["n_loops_in_ball"] for p in per],
            "sup_norm": [p["sup_norm"] for p in per]}
    for j in range(e.n):
        cols[f"grad_sup_{j + 1}"] = [p["grad_sup"][j] for p in per]
    mean, stderr = {}, {}
    for k, v in cols.items():
        m, s = sim._mean_stderr(v)
        mean[k], stderr[k] = m, s
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial"] + list(cols))
        for t in range(len(per)):
            w.writerow([t] + [cols[k][t] for k in cols])
        atomic_write(args.csv, buf.getvalue())
    if args.svg_dir and e.n == 2:
        for t in range(min(args.svg_count, args.trials)):
            _trial_svg(e, args.seed, t, grid, x0, args.R / math.sqrt(e.L),
                       os.path.join(args.svg_dir, f"trial_{t:04d}.svg"))
    emit(args, {"N_L": e.N_L, "grid": grid, "per_trial": per,
                "aggregates": {"mean": mean, "stderr": stderr}},
         f"N_L = {e.N_L}; b0/L^(n/2) = {mean['b0_normalized']:.5f} "
         f"+- {stderr['b0_normalized']:.5f} over {args.trials} trials")
    return EXIT_OK


def cmd_weyl(args):
    from .simulator import weyl_count

    N, ratio = weyl_count(args.n, args.L)
    emit(args, {"N_L": N, "ratio": ratio}, f"N_L = {N}, N_L / L^(n/2) = {ratio:.6f}")
    return EXIT_OK


def cmd_report(args):
    from .acceptance import markdown_table, run_suite

    which = sorted({int(x) for x in args.only.split(",")}) if args.only else None
    res = run_suite(which, echo=(lambda s: print(s, file=sys.stderr)) if args.verbose else None)
    table = markdown_table(res)
    if args.out:
        atomic_write(args.out, table)
    sys.stdout.write(table)
    return EXIT_OK if all(r.passed for r in res) else EXIT_CERT


# ---------------------------------------------------------------------------

def _floats(s):
    try:
        return [float(v) for v in s.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def build_parser() -> Parser:
    p = Parser(prog="nodal-lab", description="Explicit constants, local barrier "
               "certificates and torus simulations for random nodal sets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=Parser, required=True)

    def common(sp, out=True):
        sp.add_argument("--json", action="store_true", help="print the JSON record")
        if out:
            sp.add_argument("--out", help="write the JSON record to this path")
        sp.add_argument("--verbose", "-v", action="store_true")

    sp = sub.add_parser("constants", help="rho, theta, tau and the lower bounds")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--c", type=float, default=1.0, help="inner symbol-body radius")
    sp.add_argument("--d", type=float, default=1.0, help="outer symbol-body radius")
    sp.add_argument("--vol", type=float, default=1.0, help="volume of the manifold")
    sp.add_argument("--R", type=float, default=None,
                    help="ball radius for rho/theta (default 48 sqrt(5) n / c)")
    common(sp)
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("localmodel", help="certify the band-limited barrier q_{i,c}")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--i", type=int, default=0)
    sp.add_argument("--c", type=float, default=1.0)
    sp.add_argument("--eta", type=float, required=True)
    sp.add_argument("--grid", type=int, default=1024)
    sp.add_argument("--svg", help="write the nodal loops in the window as SVG")
    common(sp)
    sp.set_defaults(func=cmd_localmodel)

    sp = sub.add_parser("certify", help="check a (delta, epsilon) pair")
    sp.add_argument("--builtin", choices=["lemma5", "corollary4"])
    sp.add_argument("--field", help="binary grid field file (see docs/formats.md)")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--i", type=int, default=0)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--c", type=float, default=1.0)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--grid", type=int, default=1024)
    common(sp)
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("simulate", help="Monte Carlo over the torus ensemble")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--L", type=float, required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--grid", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--R", type=float, default=10.0,
                    help="ball B(x0, R/sqrt(L)) for loop counts and sup norms")
    sp.add_argument("--x0", type=_floats, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--csv", help="per-trial CSV export")
    sp.add_argument("--svg-dir", help="directory for SVGs of the first trials")
    sp.add_argument("--svg-count", type=int, default=4)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("weyl", help="lattice count N_L")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--L", type=float, required=True)
    common(sp)
    sp.set_defaults(func=cmd_weyl)

    sp = sub.add_parser("report", help="run the acceptance suite")
    sp.add_argument("--only", help="comma-separated criterion numbers")
    sp.add_argument("--out", help="write the markdown table here")
    sp.add_argument("--verbose", "-v", action="store_true")
    sp.set_defaults(func=cmd_report, json=False)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    if getattr(args, "threads", None) is not None and args.threads < 1:
        sys.stderr.write("nodal-lab: --threads must be >= 1\n")
        return EXIT_USAGE
    if args.verbose:
        log.setLevel(logging.INFO)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"nodal-lab: {exc}\n")
        return EXIT_USAGE
    except (ValueError, ArithmeticError) as exc:
        sys.stderr.write(f"nodal-lab: precondition failed: {exc}\n")
        return EXIT_PRE
    except RuntimeError as exc:
        # quadrature failures and chain violations
        sys.stderr.write(f"nodal-lab: {type(exc).__name__}: {exc}\n")
        return EXIT_CERT


if __name__ == "__main__":
    sys.exit(main())
