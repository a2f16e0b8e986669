"""Command-line interface.

``levyiu run CONFIG --out DIR [--workers N]`` runs the pipeline;
``levyiu validate CONFIG`` checks a configuration; ``levyiu report DIR
--format json|text`` prints a stored report.  The worker default comes from
the ``LEVYIU_WORKERS`` environment variable.  Exit codes: 0 all verdicts
pass, 1 failure or error, 2 hypothesis violation.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .errors import LevyIUError
from .parallel import WORKERS_ENV, default_workers
from .report import FORMATS, emit_report, load_report


def _parser():
    p = argparse.ArgumentParser(prog="levyiu", description="Killed Levy process simulation and IU verification.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("config")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    v = sub.add_parser("validate", help="validate a configuration")
    v.add_argument("config")
    s = sub.add_parser("report", help="print a stored report")
    s.add_argument("dir")
    s.add_argument("--format", default="text", help="json or text")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "validate":
        try:
            cfg = parse_config(args.config)
        except ConfigError as exc:
            for e in exc.errors:
                print(e, file=sys.stderr)
            return 1
        print(f"ok {cfg.config_hash}")
        return 0
    if args.command == "report":
        if args.format not in FORMATS:
            print(f"unknown report format {args.format!r}; choose one of {', '.join(FORMATS)}", file=sys.stderr)
            return 1
        try:
            sys.stdout.write(emit_report(load_report(args.dir), args.format))
        except LevyIUError as exc:
            print(str(exc), file=sys.stderr)
            return 1
        return 0
    from .pipeline import run_experiment

    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(e, file=sys.stderr)
        return 1
    workers = args.workers if args.workers is not None else default_workers()
    try:
        res = run_experiment(cfg, args.out, workers=workers)
    except LevyIUError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    sys.stdout.write(emit_report(res.report, "text"))
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
