"""Command line entry point: ``multicast-antsel run --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, EnumerationCapError, QuadratureError
from .experiment import run

log = logging.getLogger("multicast_antsel")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multicast-antsel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiments of a config file")
    r.add_argument("--config", required=True, help="YAML experiment config")
    r.add_argument("--out", required=True, help="output directory for CSV files and manifest.json")
    r.add_argument("--seed", type=int, default=None, help="override the config's master_seed")
    r.add_argument("--scenario", default=None, help="run only the scenario with this name")
    r.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    r.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run(args.config, args.out, seed=args.seed, scenario=args.scenario, jobs=args.jobs)
    except (ConfigError, EnumerationCapError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, FloatingPointError, ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for part in report.scenarios:
        log.info("%s: %d capacity rows, %d ser rows, %.1f s", part.scenario.name,
                 len(part.capacity_rows), len(part.ser_rows), part.wall_clock_s)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
