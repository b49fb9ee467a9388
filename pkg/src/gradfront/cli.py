"""Command-line entry point.

Exit codes: 0 success, 2 invalid scenario, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .errors import NumericalError, SchemaError
from .scenario import load_scenario

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERICAL = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradfront", description="Front dynamics lab for the space-trait model.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario file (dotted key = value lines)")
    common.add_argument("--out", help="artifact directory (default: output.dir or runs/<name>)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--seedless", action="store_true", default=True,
                        help="accepted for compatibility; every computation is deterministic")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("eig", parents=[common], help="principal eigenpairs and c*")
    sub.add_parser("simulate", parents=[common], help="eigen stage plus the PDE run")
    sub.add_parser("analyze", parents=[common], help="level sets and fits from an earlier simulation")
    sub.add_parser("run", parents=[common], help="full pipeline")
    sw = sub.add_parser("sweep", parents=[common], help="one pipeline run per parameter value")
    sw.add_argument("--param", required=True, choices=sorted(pipeline.SWEEP_PARAMETERS))
    sw.add_argument("--values", required=True, help="comma-separated values")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        sc = load_scenario(args.config)
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SchemaError as exc:
        for ln, msg in exc.errors:
            print(f"{args.config}:{ln}: {msg}" if ln else f"{args.config}: {msg}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        if args.command == "eig":
            d = pipeline.out_dir_for(sc, args.out)
            info = pipeline.run_eigen(sc, d)
            print(json.dumps(info.as_dict(), indent=2))
        elif args.command == "simulate":
            d = pipeline.out_dir_for(sc, args.out)
            eig = pipeline.run_eigen(sc, d)
            pipeline.run_simulation(sc, eig, d)
            print(d)
        elif args.command == "analyze":
            print(pipeline.analyze_dir(sc, args.out))
        elif args.command == "run":
            print(pipeline.run_pipeline(sc, args.out))
        else:
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            print(pipeline.sweep(sc, args.param, values, args.out, args.threads))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
