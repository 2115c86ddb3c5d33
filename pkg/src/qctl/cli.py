"""qctl command line.

    qctl <experiment> [--config FILE] [--epsilon ...] [--alpha ...] [--E ...]
         [--delta ...] [--profile NAME] [--out PREFIX] [--threads N]
    qctl list-profiles
    qctl validate --config FILE

Flags override config-file values.  Exit codes: 0 all verdicts pass,
1 any verdict fail (or interrupted/partial), 2 config or usage error,
3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import (
    EXPERIMENTS,
    ConfigError,
    apply_cli_overrides,
    catalog_lines,
    default_config,
    load_config,
)
from .experiments import run
from .output import emit
from .schrodinger import StepLimitError
from .smallmat import ContractViolationError

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3


def _grid(text: str) -> list[float]:
    try:
        return [float(p) for chunk in text.split(",") for p in chunk.split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qctl",
        description="Chirped-pulse two-level control experiments: propagate, sweep, certify.",
    )
    parser.add_argument("--version", action="version", version=f"qctl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    sub.add_parser("list-profiles", help="list the built-in control profiles")

    validate = sub.add_parser("validate", help="parse a config file and echo the resolved run")
    validate.add_argument("--config", required=True, help="path to the config file")

    for name in EXPERIMENTS:
        exp = sub.add_parser(name, help=f"run the {name} experiment")
        exp.add_argument("--config", help="config file (key = value with [section] headers)")
        exp.add_argument("--epsilon", type=_grid, metavar="X[,X...]",
                         help="epsilon value or grid override")
        exp.add_argument("--alpha", type=_grid, metavar="X[,X...]",
                         help="alpha value or grid override")
        exp.add_argument("--E", dest="e_values", type=_grid, metavar="X[,X...]",
                         help="drift splitting value or grid override")
        exp.add_argument("--delta", type=_grid, metavar="X[,X...]",
                         help="coupling inhomogeneity value or grid override")
        exp.add_argument("--profile", help="control profile name from the catalog")
        exp.add_argument("--out", help="output path prefix (default qctl-out)")
        exp.add_argument("--threads", type=int, help="worker threads for grid points")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "list-profiles":
        for line in catalog_lines():
            print(line)
        return EXIT_PASS

    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            for key, value in cfg.describe().items():
                print(f"{key} = {value}")
            print("config ok")
            return EXIT_PASS

        cfg = load_config(args.config, args.command) if args.config \
            else default_config(args.command)
        cfg = apply_cli_overrides(
            cfg, epsilon=args.epsilon, alpha=args.alpha, e_values=args.e_values,
            delta=args.delta, profile=args.profile, out=args.out, threads=args.threads)
    except (ConfigError, ContractViolationError) as exc:
        print(f"qctl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run(cfg)
    except StepLimitError as exc:
        print(f"qctl: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, ContractViolationError) as exc:
        print(f"qctl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    paths = emit(result, cfg.out_prefix)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for key, value in result.verdicts().items():
        print(f"{key}: {'pass' if value else 'FAIL'}")
    if result.partial:
        print("run interrupted: partial rows flushed", file=sys.stderr)
    print(f"wrote {paths['csv']}, {paths['svg']}, {paths['summary']} "
          f"({result.wall_time_s:.2f}s)")
    return EXIT_PASS if result.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
