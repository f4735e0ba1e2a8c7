"""Command line: ``mfl <kind> --config FILE`` and ``mfl verify --suite NAME``.

Exit status: 0 when every pass flag is true (or the run has none), 1 when
any is false, 2 on a configuration error.  ``MFL_THREADS`` sets the default
worker count.
"""
import argparse
import sys
from pathlib import Path

from mfl.config import KINDS, parse_config
from mfl.errors import ConfigError, MflError
from mfl.harness import run
from mfl.parallel import default_threads
from mfl.verify import DEFAULT_SEED, SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("thread count must be positive")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="mfl", description="Mean-field particle simulation and inference")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path)
        p.add_argument("--seed", type=_u64)
        p.add_argument("--threads", type=_positive)
    v = sub.add_parser("verify", help="run a named verification suite")
    v.add_argument("--suite", required=True)
    v.add_argument("--out", type=Path)
    v.add_argument("--seed", type=_u64, default=DEFAULT_SEED)
    v.add_argument("--threads", type=_positive)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    threads = args.threads or default_threads()

    if args.command == "verify":
        if args.suite not in SUITES:
            print(f"mfl: unknown suite {args.suite!r}; known: {', '.join(SUITES)}", file=sys.stderr)
            return EXIT_CONFIG
        checks = run_suite(args.suite, args.out, seed=args.seed, threads=threads, echo=print)
        failed = [c for c in checks if not c.passed]
        print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
        return EXIT_FAIL if failed else EXIT_OK

    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"mfl: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = parse_config(text, kind=args.command, overrides={"seed": args.seed})
    except ConfigError as exc:
        print(f"mfl: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(config, args.out, threads=threads)
    except MflError as exc:
        print(f"mfl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for key, value in manifest.summary.items():
        print(f"{key}: {value}")
    print(f"digest: {manifest.digest}")
    return EXIT_FAIL if manifest.passed is False else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
