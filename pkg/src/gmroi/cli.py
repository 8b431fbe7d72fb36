"""Command-line entry point: ``gmroi {simulate,solve,compare,sweep}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .bench import (
    ExperimentSpec,
    FloorRule,
    comparison_csv,
    load_bucket,
    resolve_floor,
    run_compare,
    run_sweep,
    sweep_csv,
)
from .core import GmroiError, InfeasibleBucket, ValidationError
from .dinkelbach import MaxIterationsExceeded, solve_fractional
from .io import ParseError, write_scenarios
from .isotonic import preprocess_bucket
from .sim import BucketRecipe, InvalidConfig, generate_bucket, load_config
from .solvers import DP_STATE_CAP, SOLVER_NAMES, SubproblemFailure, make_solver

EXIT_INPUT = 3
EXIT_INFEASIBLE = 4
EXIT_SOLVER = 5


def _exit_code(exc: GmroiError) -> int:
    if isinstance(exc, (ParseError, ValidationError, InvalidConfig)):
        return EXIT_INPUT
    if isinstance(exc, InfeasibleBucket):
        return EXIT_INFEASIBLE
    if isinstance(exc, (SubproblemFailure, MaxIterationsExceeded)):
        return EXIT_SOLVER
    return 1


def _floor_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--floor", type=float, help="explicit service floor in [0, 1]")
    p.add_argument(
        "--floor-rule",
        choices=[r.value for r in FloorRule],
        help="how to pick the floor (default: explicit if --floor given, else midpoint)",
    )


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("source", help="scenario CSV (*.csv) or YAML simulation config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--no-isotonic", action="store_true", help="skip monotone preprocessing")
    p.add_argument("--mu-tol", type=float, help="Lagrangian bisection tolerance")
    p.add_argument("--dp-state-cap", type=int, default=DP_STATE_CAP)
    p.add_argument("--out", type=Path, help="output directory")
    _floor_args(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmroi", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulation config -> scenario CSV")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-isotonic", action="store_true")
    p.add_argument("--out", type=Path, help="output directory (default: stdout)")

    p = sub.add_parser("solve", help="solve one bucket, print a JSON report")
    _common(p)
    p.add_argument("--solver", choices=SOLVER_NAMES, default="auto")
    p.add_argument("--dual-trace", type=Path, help="write the final Lagrangian dual trace as CSV")
    p.add_argument("--no-selection", action="store_true", help="omit selections from the report")

    p = sub.add_parser("compare", help="cross-solver comparison with TAR_ERR")
    _common(p)
    p.add_argument("--solver", action="append", choices=SOLVER_NAMES[:3])
    p.add_argument("--no-timing", action="store_true", help="omit wall times (byte-stable output)")

    p = sub.add_parser("sweep", help="constraint tightness sweep")
    _common(p)
    p.add_argument("--solver", action="append", choices=SOLVER_NAMES[:3])
    p.add_argument("--sweep-points", type=int, default=10)
    p.add_argument("--no-timing", action="store_true")
    return parser


def _spec(args: argparse.Namespace, **extra) -> ExperimentSpec:
    rule = args.floor_rule or ("explicit" if args.floor is not None else "midpoint")
    return ExperimentSpec(
        source=args.source,
        floor_rule=FloorRule(rule),
        floor_value=args.floor,
        seed=args.seed,
        output_dir=args.out,
        isotonic=not args.no_isotonic,
        mu_tolerance=args.mu_tol,
        dp_state_cap=args.dp_state_cap,
        **extra,
    )


def _write(text: str, out_dir: Path | None, name: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text, encoding="utf-8")


def cmd_simulate(args: argparse.Namespace) -> None:
    cfg = load_config(args.config, seed=args.seed)
    if isinstance(cfg, BucketRecipe):
        bucket = replace(cfg, isotonic=not args.no_isotonic).build()
    else:
        bucket = generate_bucket([cfg])
        if not args.no_isotonic:
            bucket = preprocess_bucket(bucket)
    if args.out is None:
        write_scenarios(bucket, sys.stdout)
    else:
        args.out.mkdir(parents=True, exist_ok=True)
        write_scenarios(bucket, args.out / "scenarios.csv")


def cmd_solve(args: argparse.Namespace) -> None:
    spec = _spec(args)
    bucket = load_bucket(spec)
    bucket = bucket.with_floor(resolve_floor(bucket, spec.floor_rule, spec.floor_value))
    solver = make_solver(args.solver, mu_tolerance=args.mu_tol, dp_state_cap=args.dp_state_cap)
    report = solve_fractional(bucket, solver=solver)
    payload = report.to_dict(include_selections=not args.no_selection)
    payload["service_floor"] = float(bucket.service_floor)
    payload["n_skus"] = bucket.n
    payload["n_scenarios"] = bucket.total_scenarios
    payload["rationalized_isp"] = bucket.rationalized
    _write(json.dumps(payload, indent=2) + "\n", args.out, "report.json")
    if args.dual_trace is not None:
        with open(args.dual_trace, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mu", "induced_isp", "dual_value"])
            for pt in report.iterations[-1].dual_trace:
                w.writerow([repr(pt.mu), repr(pt.induced_isp), repr(pt.dual_value)])


def cmd_compare(args: argparse.Namespace) -> None:
    solvers = tuple(args.solver or ("exact", "lagrangian", "unconstrained"))
    spec = _spec(args, solvers=solvers, record_timing=not args.no_timing)
    rows = run_compare(spec)
    if args.out is None:
        sys.stdout.write(comparison_csv(rows, solvers, timing=not args.no_timing))


def cmd_sweep(args: argparse.Namespace) -> None:
    solvers = tuple(args.solver or ("exact", "lagrangian"))
    spec = _spec(args, solvers=solvers, sweep_points=args.sweep_points, record_timing=not args.no_timing)
    rows = run_sweep(spec)
    if args.out is None:
        sys.stdout.write(sweep_csv(rows, solvers, timing=not args.no_timing))


COMMANDS = {"simulate": cmd_simulate, "solve": cmd_solve, "compare": cmd_compare, "sweep": cmd_sweep}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except GmroiError as exc:
        err = {"error": exc.category, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return _exit_code(exc)
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
