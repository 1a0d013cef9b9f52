"""Command-line entry point: ``wavetank converge|reflect|linear|picard``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import EXPERIMENTS, RunConfig, load_config, validate
from .errors import WavetankError
from .experiments import RUNNERS, write_outputs

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavetank", description="Boussinesq-system wave tank experiments")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", type=Path, help="key = value configuration file")
    parser.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    parser.add_argument("--check", action="store_true", help="exit with status 2 if an acceptance threshold fails")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config, args.experiment)
        else:
            cfg = RunConfig(experiment=args.experiment)
            validate(cfg)
        run, check = RUNNERS[args.experiment]
        summary = run(cfg)
    except (WavetankError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    problems = check(summary)
    for path in write_outputs(summary, cfg, args.out, problems):
        print(path)
    for problem in problems:
        print(f"threshold: {problem}", file=sys.stderr)
    if args.check and problems:
        return EXIT_THRESHOLD
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
