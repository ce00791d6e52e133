"""Command line entry point ``lab``.

Exit codes: 0 success, 1 failed self-test, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, LabIOError
from .experiments import load_config, run_experiment, write_report

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _parser():
    ap = argparse.ArgumentParser(prog="lab", description="Sparse random matrix laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment and write its report")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--threads", type=int, default=1)
    val = sub.add_parser("validate", help="parse and validate a config")
    val.add_argument("config")
    st = sub.add_parser("selftest", help="run the exact checks of the deterministic statements")
    st.add_argument("--quick", action="store_true", help="reduced instance counts")
    return ap


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise LabIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return load_config(text)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = _load(args.config)
            print(f"ok: {cfg.kind} with {cfg.trials} trials")
            return EXIT_OK
        if args.command == "run":
            cfg = _load(args.config)
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1")
            rep = run_experiment(cfg, threads=args.threads)
            for path in write_report(rep, args.format, args.out):
                print(path)
            if rep.errors:
                print(f"{len(rep.errors)} trial(s) recorded errors", file=sys.stderr)
            return EXIT_OK
        from .checks import DETERMINISTIC, run_checks

        results = run_checks(DETERMINISTIC, quick=args.quick)
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LabIOError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
