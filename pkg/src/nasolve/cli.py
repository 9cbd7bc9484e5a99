"""Command-line experiment runner.

Examples:
    nasolve --problem heq --omega 1 --n 500 --method newton --method n_anderson
    nasolve --problem multipoly --k 3 --method newton --out results --format json
    nasolve --problem registry --r 0.5
"""

from __future__ import annotations

import argparse
import sys

from .core import SolverConfig
from .harness import (
    ExperimentSpec,
    compare_table,
    emit_report,
    run_experiment,
    run_registry,
    write_summary,
)
from .problems import REGISTRY_NAMES
from .solvers import MethodId

ALL_METHODS = tuple(MethodId)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nasolve",
        description="Run nonlinear-solver benchmark experiments and emit "
        "summary tables plus per-method residual histories.",
    )
    parser.add_argument(
        "--problem",
        required=True,
        help="'heq', 'multipoly', 'registry' (all small-scale problems), "
        f"or a registry name from: {', '.join(REGISTRY_NAMES)}",
    )
    parser.add_argument(
        "--method",
        action="append",
        choices=[m.value for m in MethodId],
        help="repeatable; defaults to all methods",
    )
    parser.add_argument("--n", type=int, default=None, help="problem size (heq/multipoly)")
    parser.add_argument("--omega", type=float, default=1.0, help="H-equation parameter")
    parser.add_argument("--k", type=int, default=2, help="multipoly exponent (root order k-1)")
    parser.add_argument("--r", type=float, default=0.9, help="safeguard parameter in (0,1)")
    parser.add_argument("--tol", type=float, default=1e-8)
    parser.add_argument("--max-iters", type=int, default=50)
    parser.add_argument(
        "--linesearch",
        action="store_true",
        help="also enable the Armijo trigger for n_anderson / gamma_n_anderson",
    )
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--keep-history", action="store_true", help="retain iterate vectors")
    parser.add_argument("--parallel", action="store_true", help="run methods concurrently")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    methods = tuple(MethodId(m) for m in args.method) if args.method else ALL_METHODS
    if args.linesearch:
        upgrade = {
            MethodId.n_anderson: MethodId.armijo_n_anderson,
            MethodId.gamma_n_anderson: MethodId.gamma_armijo_n_anderson,
        }
        methods = tuple(dict.fromkeys(upgrade.get(m, m) for m in methods))
    try:
        cfg = SolverConfig(tol=args.tol, max_iters=args.max_iters, r=args.r)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.problem == "registry":
            reports = run_registry(methods, cfg, parallel=args.parallel)
            write_summary(reports, f"{args.out}/registry_summary.{args.format}", args.format)
            for report in reports:
                if any(not row.skipped for row in report.rows):
                    emit_report(report, args.format, args.out)
        else:
            spec = ExperimentSpec(
                problem=args.problem,
                methods=methods,
                n=args.n,
                omega=args.omega,
                k=args.k,
                config=cfg,
                keep_history=args.keep_history,
            )
            reports = [run_experiment(spec, parallel=args.parallel)]
            emit_report(reports[0], args.format, args.out)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    sys.stdout.write(compare_table(reports))
    skipped = [
        report.problem for report in reports if all(row.skipped for row in report.rows)
    ]
    if skipped:
        print(f"skipped (not transcribed): {', '.join(skipped)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
