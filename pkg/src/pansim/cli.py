"""Command-line entry point.

Exit codes: 0 success, 2 config/input error, 3 runtime invariant
violation. ``run`` executes in-process and writes the four artifact
files; ``serve`` exposes the same operations over HTTP.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .harness import InvariantViolation, run_scenario, write_outputs
from .timeseries import (TimeSeriesError, load_timeseries_csv,
                         parse_column_map)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_scenario(config, seed_override=args.seed)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    out_dir = Path(args.out)
    write_outputs(report, out_dir, epochs_only=args.epochs_only,
                  decision_epoch=config.run.decision_epoch)
    print(json.dumps(report.summary, sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.config}: ok")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    try:
        mapping = parse_column_map(args.map)
        series = load_timeseries_csv(args.csv, mapping)
    except TimeSeriesError as exc:
        print(f"ingest error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    payload = json.dumps(series.to_dict(), sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n")
        print(f"wrote {len(series)} rows ({sum(series.gaps)} gaps) to {args.out}")
    else:
        print(payload)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("pansim.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pansim",
        description="Deterministic pandemic-management simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write artifacts")
    p_run.add_argument("config", help="scenario config JSON")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override run.seed from the config")
    p_run.add_argument("--out", default="pansim-out",
                       help="output directory (default: pansim-out)")
    p_run.add_argument("--epochs-only", action="store_true",
                       help="keep only decision-epoch rows in report.csv")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="validate a scenario config")
    p_val.add_argument("config", help="scenario config JSON")
    p_val.set_defaults(func=_cmd_validate)

    p_ing = sub.add_parser("ingest", help="load a CSV time series")
    p_ing.add_argument("csv", help="CSV file with a date column")
    p_ing.add_argument("--map", required=True,
                       help="column map, e.g. date=Date,infected=Cases")
    p_ing.add_argument("--out", default=None, help="write series JSON here")
    p_ing.set_defaults(func=_cmd_ingest)

    p_srv = sub.add_parser("serve", help="start the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
