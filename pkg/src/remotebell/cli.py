"""Command line entry point.

    remotebell {fringe,correlation,chsh,oracle} [--config PATH] [--seed N]
               [--trials N] [--out PATH]

Exit status: 0 on success, 2 for configuration errors, 3 for runtime errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SCENARIOS, ConfigError, ExperimentConfig, load_config
from .scenarios import run_scenario, write_rows, write_table

log = logging.getLogger("remotebell")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("trials must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="remotebell", description=__doc__.split("\n\n")[0])
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    parser.add_argument("--trials", type=_positive, help="trials per point (overrides any duration)")
    parser.add_argument("--out", help="CSV output path; stdout when omitted")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    # argparse exits with status 2 on bad arguments, matching EXIT_CONFIG
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
        config = config.with_overrides(scenario=args.scenario, seed=args.seed, trials=args.trials, output=args.out)
    except ConfigError as exc:
        print(f"remotebell: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        table = run_scenario(config)
        if config.output:
            write_table(table, config.output)
            log.info("wrote %d rows to %s", len(table), config.output)
        else:
            write_rows(table, sys.stdout)
    except Exception as exc:  # noqa: BLE001
        print(f"remotebell: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
