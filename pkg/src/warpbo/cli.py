"""Command-line entry point: ``warpbo run|aggregate|list-objectives``."""

from __future__ import annotations

import argparse
import logging
import sys

from warpbo.bench import BENCHMARKS
from warpbo.experiment import ConfigError, aggregate_directory, load_config, run_experiment

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config, objective_cmd=args.objective_cmd)
    except (ConfigError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    failures = run_experiment(config, output_dir=args.output_dir, jobs=args.jobs)
    for method, seed, message in failures:
        print(f"run failed: method={method} seed={seed}: {message}", file=sys.stderr)
    return EXIT_RUNTIME if failures else EXIT_OK


def _cmd_aggregate(args) -> int:
    try:
        result = aggregate_directory(args.directory)
    except (OSError, ValueError) as exc:
        print(f"aggregate failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not result:
        print(f"no trace files found in {args.directory}", file=sys.stderr)
        return EXIT_VALIDATION
    for method, rows in result.items():
        print(f"{method}: {len(rows)} iterations, final mean best {rows[-1].mean_best:.6g}")
    return EXIT_OK


def _cmd_list(args) -> int:
    for name, bench in BENCHMARKS.items():
        box = " x ".join(f"[{a:g}, {b:g}]" for a, b in bench.bounds)
        print(f"{name}\tdim={bench.dim}\tbox={box}\tmin={bench.known_min_value:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warpbo", description="Prior-warped Bayesian optimisation experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a method x seed grid from a JSON config")
    run.add_argument("config")
    run.add_argument("--jobs", type=int, default=1, help="parallel (method, seed) cells")
    run.add_argument("--output-dir", default=None, help="override output_dir from the config")
    run.add_argument("--objective-cmd", default=None,
                     help="external objective command; overrides the config's objective")
    run.set_defaults(func=_cmd_run)

    agg = sub.add_parser("aggregate", help="recompute aggregates from trace files in a directory")
    agg.add_argument("directory")
    agg.set_defaults(func=_cmd_aggregate)

    lst = sub.add_parser("list-objectives", help="list builtin objectives")
    lst.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
