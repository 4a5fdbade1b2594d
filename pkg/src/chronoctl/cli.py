"""Command line front end ``chronoctl``.

Commands
--------
simulate CONFIG OUTPUT
    Write the trajectory CSV (time, states, outputs).
analyze CONFIG [--test ...] [--sc S] [--r R]
    Controllability/observability report as JSON on stdout.
dualize CONFIG OUTPUT
    Write the configuration of the dual system.
realize CONFIG [--tol TOL]
    Minimality report with the kernel factorization summary.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 violated theorem hypothesis.
"""

from __future__ import annotations

import argparse
import csv
import sys as _sys
import time
import warnings

import numpy as np

from . import __version__
from .analysis import (
    RANK_RTOL,
    controllability_gramian,
    kalman_controllability,
    kalman_observability,
    observability_gramian,
    pk_controllability,
    tv_controllability,
    tv_observability,
)
from .config import ConfigError, dump_json, dual_config, format_number, load_config
from .expr import ExprEvalError
from .linsys import (
    BACKWARD,
    NumericalFailure,
    dualize_system,
    is_progressive,
    solve_backward_ivp,
    solve_forward_ivp,
)
from .realization import DEFAULT_TOL, HypothesisViolation, export_factorization_csv, is_minimal

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_HYPOTHESIS = 0, 2, 3, 4


def rank_summary(rep):
    out = {
        "test": rep.test,
        "verdict": rep.verdict,
        "holds": rep.holds,
        "rank": rep.rank,
        "n": rep.n,
        "matrix_shape": list(rep.shape),
        "threshold": rep.threshold,
        "singular_values": rep.singular_values,
    }
    if rep.s_c is not None:
        out["s_c"] = rep.s_c
        out["r"] = rep.order
    if rep.cross_check is not None:
        out["cross_check"] = rank_summary(rep.cross_check)
    return out


def gramian_summary(rep):
    if rep is None:
        return None
    return {
        "verdict": rep.verdict,
        "holds": rep.holds,
        "rank": rep.rank,
        "interval": list(rep.interval),
        "eigenvalues": rep.eigenvalues,
        "gramian": rep.gramian,
    }


def _header(command, args, cfg):
    sys = cfg.system
    return {
        "command": command,
        "config": args.config,
        "version": __version__,
        "direction": sys.direction,
        "timescale": str(sys.ts),
        "interval": [float(x) for x in sys.interval],
        "dense_step": float(sys.grid.dense_step),
        "tolerances": {"rank_rtol": RANK_RTOL},
    }


def _emit(report, args, started):
    if getattr(args, "timing", False):
        report["wall_time"] = time.perf_counter() - started
    _sys.stdout.write(dump_json(report))


def cmd_simulate(args):
    cfg = load_config(args.config)
    if cfg.control is None:
        raise ConfigError("control required")
    if cfg.initial_state is None:
        raise ConfigError("initial_state required")
    sys = cfg.system
    if sys.direction == BACKWARD:
        traj = solve_backward_ivp(sys, cfg.initial_state, cfg.control)
        rows = range(len(traj.times) - 1, -1, -1)
        time_col = "s"
    else:
        traj = solve_forward_ivp(sys, cfg.initial_state, cfg.control)
        rows = range(len(traj.times))
        time_col = "t"
    x = traj.state.values[:, :, 0]
    y = traj.output.values[:, :, 0]
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([time_col] + [f"y_{i + 1}" for i in range(sys.n)]
                   + [f"gamma_{i + 1}" for i in range(sys.p)])
        for k in rows:
            w.writerow([format_number(traj.times[k])] + [format_number(v) for v in x[k]]
                       + [format_number(v) for v in y[k]])
    return EXIT_OK


def cmd_analyze(args):
    started = time.perf_counter()
    cfg = load_config(args.config)
    sys = cfg.system
    report = _header("analyze", args, cfg)
    report["test"] = args.test
    back = sys if sys.direction == BACKWARD else dualize_system(sys)
    report["progressive"] = {"holds": bool(prog := is_progressive(back)),
                             "witness": prog.witness}
    report["constant"] = sys.is_constant
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.test in ("controllability", "both"):
            report["controllability"] = _analyze_one(sys, args, "controllability")
        if args.test in ("observability", "both"):
            report["observability"] = _analyze_one(sys, args, "observability")
    report["warnings"] = sorted({str(w.message) for w in caught})
    _emit(report, args, started)
    return EXIT_OK


def _analyze_one(sys, args, kind):
    out = {}
    if sys.is_constant:
        if kind == "controllability":
            main = kalman_controllability(sys)
            out["kalman"] = rank_summary(main)
            out["pk"] = rank_summary(pk_controllability(sys))
        else:
            main = kalman_observability(sys)
            out["kalman"] = rank_summary(main)
        verdict = main.holds
    else:
        fn = tv_controllability if kind == "controllability" else tv_observability
        main = fn(sys, args.sc, args.r)
        out["time_varying"] = rank_summary(main)
        verdict = main.holds
    gram = (controllability_gramian if kind == "controllability" else observability_gramian)(sys)
    out["gramian"] = gramian_summary(gram)
    # the derivative tests are sufficient only; the Gramian decides otherwise
    out["verdict"] = bool(verdict or (not sys.is_constant and gram.holds))
    return out


def cmd_dualize(args):
    cfg = load_config(args.config)
    out = dual_config(cfg.raw)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(dump_json(out))
    return EXIT_OK


def cmd_realize(args):
    started = time.perf_counter()
    cfg = load_config(args.config)
    report = _header("realize", args, cfg)
    report["tolerances"]["factor_tol"] = args.tol
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = is_minimal(cfg.system, tol=args.tol)
    fact = res.factorization
    report.update({
        "minimal": res.minimal,
        "n": res.n,
        "time_invariant": res.time_invariant,
        "progressive": {"holds": res.progressive.holds, "witness": res.progressive.witness},
        "controllability": rank_summary(res.controllability),
        "observability": rank_summary(res.observability),
        "controllability_gramian": gramian_summary(res.controllability_gramian),
        "observability_gramian": gramian_summary(res.observability_gramian),
        "factorization": {
            "separable_rank": fact.rank,
            "residual": fact.residual,
            "certified": fact.certified,
            "s_points": fact.s_points,
            "z_points": fact.z_points,
            "singular_values": fact.singular_values,
            "scope": "realizable at sampled resolution",
        },
        "kernel_agrees": res.kernel_agrees,
        "warnings": sorted({str(w.message) for w in caught}),
    })
    if args.export:
        paths = export_factorization_csv(fact, args.export)
        report["factorization"]["files"] = [str(p) for p in paths]
    _emit(report, args, started)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="chronoctl",
                                description="Linear control systems on time scales.")
    p.add_argument("--version", action="version", version=f"chronoctl {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="solve the system and write a trajectory CSV")
    s.add_argument("config")
    s.add_argument("output")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="controllability and observability report")
    a.add_argument("config")
    a.add_argument("--test", choices=("controllability", "observability", "both"),
                   default="both")
    a.add_argument("--sc", type=str, default=None,
                   help="test point of the time-varying tests (default: s0)")
    a.add_argument("--r", type=int, default=1, help="derivative order, at most 3")
    a.add_argument("--timing", action="store_true", help="include wall time in the report")
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("dualize", help="write the configuration of the dual system")
    d.add_argument("config")
    d.add_argument("output")
    d.set_defaults(func=cmd_dualize)

    r = sub.add_parser("realize", help="minimality report")
    r.add_argument("config")
    r.add_argument("--tol", type=float, default=DEFAULT_TOL)
    r.add_argument("--export", metavar="DIR", help="write factor CSV files into DIR")
    r.add_argument("--timing", action="store_true", help="include wall time in the report")
    r.set_defaults(func=cmd_realize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"chronoctl: config error: {err}", file=_sys.stderr)
        return EXIT_CONFIG
    except HypothesisViolation as err:
        print(f"chronoctl: {err}", file=_sys.stderr)
        return EXIT_HYPOTHESIS
    except (NumericalFailure, ExprEvalError, np.linalg.LinAlgError, FloatingPointError) as err:
        print(f"chronoctl: numerical failure: {err}", file=_sys.stderr)
        return EXIT_NUMERIC
    except ValueError as err:
        print(f"chronoctl: invalid request: {err}", file=_sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
