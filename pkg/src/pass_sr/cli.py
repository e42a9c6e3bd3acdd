"""Command-line front end: run / check / trace an experiment spec."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .harness import SOLVER_NAMES, emit_results, load_spec, run_experiment


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("spec", help="experiment spec file (INI)")
    sub.add_argument("--out", default="out", help="output directory for CSV files")
    sub.add_argument("--seed", type=int, default=None, help="override the master seed")
    sub.add_argument("--solvers", default=None,
                     help=f"comma-separated subset of {','.join(SOLVER_NAMES)}")
    sub.add_argument("--realizations", type=int, default=None,
                     help="override the realization count")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker processes for realizations")
    sub.add_argument("--keep-going", action="store_true",
                     help="exit 0 even if individual solver runs fail")


def _load(args) -> "ExperimentSpec":
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, master_seed=args.seed)
    if args.solvers is not None:
        spec = replace(spec, solvers=tuple(s.strip() for s in args.solvers.split(",")))
    if args.realizations is not None:
        spec = replace(spec, num_realizations=args.realizations)
    return spec


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pass-sr",
        description="PASS-assisted symbiotic-radio sum-rate experiments")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (("run", "run the experiment and write result CSVs"),
                        ("trace", "run the experiment and write convergence traces"),
                        ("check", "validate a spec file without running it")):
        _add_common(subs.add_parser(name, help=blurb))
    args = parser.parse_args(argv)

    try:
        spec = _load(args)
    except Exception as exc:  # noqa: BLE001 - report bad specs, not tracebacks
        print(f"spec error: {exc}", file=sys.stderr)
        return 2

    if args.command == "check":
        cells = len(spec.solvers) * len(spec.sweep_values) * spec.num_realizations
        print(f"spec ok: scenario={spec.scenario!r} solvers={','.join(spec.solvers)} "
              f"axis={spec.sweep_axis} values={list(spec.sweep_values)} "
              f"realizations={spec.num_realizations} ({cells} runs)")
        return 0

    rows = run_experiment(spec, threads=args.threads)
    paths = emit_results(rows, Path(args.out))
    failures = [r for r in rows if r.failed]
    for row in failures:
        print(f"FAILED {row.solver} sweep={row.sweep_value} "
              f"realization={row.realization}: {row.error}", file=sys.stderr)
    wrote = ("traces",) if args.command == "trace" else ("raw", "aggregated", "traces")
    for key in wrote:
        print(f"wrote {paths[key]}")
    if failures and not args.keep_going:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
