"""Command-line entry point ``pgconv``.

Exit codes: 0 success, 1 failed checks, 2 invalid config or arguments,
3 numerical failure during a run.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__, acceptance
from . import experiments as ex
from .errors import ConfigError, ConvergenceError, DomainError, NumericError

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="pgconv", description="policy optimization experiments and checks")
    p.add_argument("--version", action="version", version=f"pgconv {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a config file or a named preset and write CSV traces")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON experiment config")
    src.add_argument("--preset", choices=ex.PRESETS)
    r.add_argument("--output-dir", help=f"output directory (default: ${ex.OUTPUT_ENV} or the cwd)")

    f = sub.add_parser("rate-fit", help="fit a linear rate to an error column of a trace")
    f.add_argument("--trace", required=True)
    f.add_argument("--from", dest="t0", type=int, required=True)
    f.add_argument("--to", dest="t1", type=int, required=True)
    f.add_argument("--column", help="error column (default: first known error column)")

    c = sub.add_parser("check", help="run the acceptance suite")
    c.add_argument("--suite", default="all", choices=("all", *acceptance.SUITES))
    c.add_argument("--json", action="store_true", help="emit one JSON object per criterion")
    return p


def _run(args):
    if args.preset:
        paths = ex.run_preset(args.preset, args.output_dir)
    else:
        cfg = ex.ExperimentConfig.load(args.config)
        paths = [ex.run(cfg, args.output_dir)]
    for path in paths:
        print(path)
    return EXIT_OK


def _rate_fit(args):
    fit = ex.rate_fit_file(args.trace, args.t0, args.t1, args.column)
    print(json.dumps(fit.to_dict()))
    return EXIT_OK


def _check(args):
    ok = True
    for number in acceptance.suite_numbers(args.suite):
        res = acceptance.run_criterion(number)
        ok &= res.ok
        print(json.dumps(res.to_dict()) if args.json else res.line(), flush=True)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    handler = {"run": _run, "rate-fit": _rate_fit, "check": _check}[args.command]
    try:
        return handler(args)
    except (ConfigError, DomainError) as exc:
        print(f"pgconv: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ConvergenceError, FloatingPointError) as exc:
        print(f"pgconv: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"pgconv: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
