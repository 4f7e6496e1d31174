"""Command-line entry point: one subcommand per run mode.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import DomainError, NumericalError, ValidationError
from .harness import COMMANDS, RunConfig, parse_config_text, run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wickheat",
        description=(
            "chaos-expansion runs for parabolic equations with Wick-product "
            "random potentials"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, help=f"run the {cmd} pipeline")
        p.add_argument("--config", type=Path, default=None, help="config file path")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="base RNG seed")
        p.add_argument(
            "--eps", type=str, default=None, help="comma-separated eps list"
        )
        p.add_argument("--p", type=int, default=None, help="evaluation exponent p")
        p.add_argument("--m", type=int, default=None, help="exponent split m >= 2")
        p.add_argument("--k", type=int, default=None, help="truncation variable count")
        p.add_argument("--order", type=int, default=None, help="truncation max order")
        p.add_argument("--workers", type=int, default=None, help="thread count")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config is not None:
            raw = parse_config_text(Path(args.config).read_text())
        overrides = {
            "run.command": args.command,
            "run.seed": args.seed,
            "eps.values": args.eps,
            "norms.p": args.p,
            "norms.m": args.m,
            "truncation.K": args.k,
            "truncation.P": args.order,
            "run.workers": args.workers,
        }
        if args.out is not None:
            overrides["run.out"] = str(args.out)
        config = RunConfig.from_mapping(raw, overrides)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        out = run(config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    print(f"wrote artifacts to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
