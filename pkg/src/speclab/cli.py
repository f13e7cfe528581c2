"""``speclab <command> -c <config> [-o <dir>] [--seed N] [--jobs K]``."""
from __future__ import annotations

import argparse
import sys

from .config import COMMANDS, load_config
from .errors import SpeclabError
from .plotdata import SOURCES, emit_plot_data
from .runner import run

EXIT_OK, EXIT_ERROR, EXIT_INVARIANT = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="speclab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        c = sub.add_parser(cmd)
        c.add_argument("-c", "--config", required=True, help="TOML experiment file")
        c.add_argument("-o", "--output", help="output directory (overrides the config)")
        c.add_argument("--seed", type=int, help="overrides the config seed")
        c.add_argument("--jobs", type=int, default=1, help="worker threads")
        c.add_argument("--no-cache", action="store_true", help="recompute eigenpairs")
    pl = sub.add_parser("plot", help="emit plot-ready CSVs from a finished run")
    pl.add_argument("run_dir")
    pl.add_argument("--only", choices=sorted(SOURCES), action="append")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            for name, path in emit_plot_data(args.run_dir, args.only).items():
                print(f"{name} = {path}")
            return EXIT_OK
        cfg = load_config(args.config)
        if args.jobs < 1:
            raise SpeclabError(f"--jobs must be >= 1, got {args.jobs}", "cli_harness")
        rec = run(args.command, cfg, args.output, args.seed, args.jobs, not args.no_cache)
    except SpeclabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"config_hash = {rec.config_hash}")
    for k, v in rec.summary.items():
        print(f"{k} = {v}")
    for msg in rec.failures:
        print(f"FAIL {msg}", file=sys.stderr)
    return EXIT_OK if rec.passed else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
