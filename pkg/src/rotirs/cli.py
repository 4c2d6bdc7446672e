"""Command line entry point: ``rotirs run`` and ``rotirs prop-check``."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .errors import ConfigError, DegenerateChannelError, DegenerateGeometryError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("rotirs")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotirs",
                                     description="Rotatable double-IRS link simulations.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep described by a YAML config and write CSV")
    run.add_argument("--config", required=True, help="path to the YAML scenario/sweep file")
    run.add_argument("--out", required=True, help="CSV destination ('-' for stdout)")
    run.add_argument("--preset", choices=["desk", "paper"], help="array sizes and PSO budget")
    run.add_argument("--seed", type=int, help="master seed (overrides the config)")
    run.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    run.add_argument("--workers", type=int, help="worker processes")

    check = sub.add_parser("prop-check", help="run an invariant suite")
    check.add_argument("--suite", required=True,
                       help="geometry, channel, beamform, rotation, solver or all")
    check.add_argument("--seed", type=int, default=0)
    return parser


def _run(args) -> int:
    from .experiment import emit_csv, load_config, run_experiment

    spec = load_config(args.config, args.preset)
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError(f"--seed: value {args.seed} out of range [0, 2^64)")
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.workers is not None:
        changes["workers"] = args.workers
    if changes:
        spec = spec.with_overrides(**changes)
    log.info("running %d scheme(s) x %d point(s), %d trial(s), preset %s",
             len(spec.schemes), len(spec.values), spec.trials, spec.preset)
    rows = run_experiment(spec)
    if args.out == "-":
        emit_csv(rows, sys.stdout)
    else:
        try:
            emit_csv(rows, args.out)
        except OSError as exc:
            raise ConfigError(f"--out: cannot write {args.out}: {exc.strerror}") from None
        log.info("wrote %d rows to %s", len(rows), args.out)
    return EXIT_OK


def _prop_check(args) -> int:
    from .checks import run_suite

    try:
        results = run_suite(args.suite, args.seed)
    except KeyError as exc:
        raise ConfigError(f"--suite: {exc.args[0]}") from None
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return _run(args)
        return _prop_check(args)
    except (ConfigError, DegenerateGeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DegenerateChannelError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
