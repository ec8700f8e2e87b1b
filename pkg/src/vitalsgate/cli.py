"""Command-line entry point.

Subcommands:
    node simulate     run a virtual node from a scenario file
    gateway serve     run the gateway (ingest socket + HTTP API)
    report tables     regenerate the hourly tables from a store or the corpus
    corpus validate   recompute the reference averages and compare

Exit codes: 0 success, 1 usage error, 2 runtime failure,
3 validation or golden mismatch (and gappy reports).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analytics import (
    EXPECTED_GRAND_HUMIDITY_MEAN,
    grand_mean,
    table_report_from_corpus,
    table_report_from_records,
    validate_corpus,
    write_series_csv,
    write_table_csv,
    write_table_json,
)
from .corpus import load_corpus
from .model import PARAMETERS, SampleValidationError, validate_sample

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_MISMATCH = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 on usage errors; the contract says 1
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vitalsgate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"vitalsgate {__version__}")
    parser.add_argument(
        "--log-level", default="WARNING", help="root log level (default: WARNING)"
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    node = sub.add_parser("node", help="virtual sensor node")
    node_sub = node.add_subparsers(dest="node_command", required=True, parser_class=_Parser)
    simulate = node_sub.add_parser("simulate", help="run a node from a scenario file")
    simulate.add_argument("--scenario", required=True, help="scenario TOML file")
    target = simulate.add_mutually_exclusive_group(required=True)
    target.add_argument("--connect", metavar="HOST:PORT", help="gateway ingest socket")
    target.add_argument("--out", metavar="FILE", help="write raw frames to a file instead")
    simulate.add_argument(
        "--speed",
        type=float,
        default=None,
        metavar="N",
        help="wall-clock compression: N virtual seconds per real second "
        "(default: scenario's time_compression, else unpaced)",
    )
    simulate.add_argument("--seed", type=int, default=None, help="override the scenario RNG seed")

    gateway = sub.add_parser("gateway", help="the data-processing service")
    gw_sub = gateway.add_subparsers(dest="gateway_command", required=True, parser_class=_Parser)
    serve = gw_sub.add_parser("serve", help="serve ingest + HTTP APIs until interrupted")
    serve.add_argument("--config", default=None, help="gateway TOML config file")
    serve.add_argument("--listen", type=int, default=None, help="ingest port (default 7070)")
    serve.add_argument("--http", type=int, default=None, help="HTTP port (default 8080)")
    serve.add_argument("--store", default=None, help="store directory (default ./store)")
    serve.add_argument(
        "--time-mode",
        choices=("wall", "frame-paced"),
        default=None,
        help="arrival stamping: wall clock, or one frame period per frame (replays)",
    )
    serve.add_argument("--ui", default=None, help="serve this directory at /ui")

    report = sub.add_parser("report", help="analytics outputs")
    report_sub = report.add_subparsers(dest="report_command", required=True, parser_class=_Parser)
    tables = report_sub.add_parser("tables", help="write table_<p>.csv / series_<p>.csv")
    source = tables.add_mutually_exclusive_group(required=True)
    source.add_argument("--store", help="gateway store directory")
    source.add_argument("--corpus", action="store_true", help="use the bundled corpus")
    tables.add_argument(
        "--parameter",
        choices=PARAMETERS,
        default=None,
        help="one parameter (default: all five)",
    )
    tables.add_argument("--out", required=True, help="output directory")

    corpus_cmd = sub.add_parser("corpus", help="bundled corpus tools")
    corpus_sub = corpus_cmd.add_subparsers(dest="corpus_command", required=True, parser_class=_Parser)
    validate = corpus_sub.add_parser(
        "validate", help="recompute Average rows and the grand humidity mean"
    )
    validate.add_argument("--file", default=None, help="alternate corpus CSV to validate")
    return parser


# -- node simulate ------------------------------------------------------------


def _cmd_simulate(args) -> int:
    from .sim.node import FileSink, NodeConfig, SocketSink, run_node
    from .sim.scenario import ScenarioError, load_scenario_file

    try:
        node_table, scenario = load_scenario_file(args.scenario)
    except FileNotFoundError:
        print(f"scenario file not found: {args.scenario}", file=sys.stderr)
        return EXIT_RUNTIME
    except ScenarioError as exc:
        print(f"invalid scenario {args.scenario}:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  {problem}", file=sys.stderr)
        return EXIT_MISMATCH

    config = NodeConfig(
        node_id=int(node_table.get("node_id", 1)),
        scenario=scenario,
        sample_period_ms=int(node_table.get("sample_period_ms", 1000)),
        transmit_period_ms=int(node_table.get("transmit_period_ms", 2000)),
        rng_seed=int(node_table.get("rng_seed", 0)) if args.seed is None else args.seed,
        age_years=int(node_table.get("age_years", 30)),
    )
    speed = args.speed if args.speed is not None else scenario.speed_hint

    if args.out:
        sink = FileSink(args.out)
    else:
        host, _, port = args.connect.rpartition(":")
        try:
            sink = SocketSink(host or "127.0.0.1", int(port))
        except OSError as exc:
            print(f"cannot reach gateway {args.connect}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    try:
        report = run_node(config, sink, speed=speed)
    finally:
        sink.close()
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK if report.completed else EXIT_RUNTIME


# -- gateway serve -------------------------------------------------------------


def _cmd_serve(args) -> int:
    from .gateway.config import load_config
    from .gateway.server import PortInUse, serve

    try:
        config = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.listen is not None:
        config.listen_port = args.listen
    if args.http is not None:
        config.http_port = args.http
    if args.store is not None:
        config.store_dir = args.store
    if args.time_mode is not None:
        config.time_mode = args.time_mode
    if args.ui is not None:
        config.ui_dir = args.ui
    try:
        serve(config)
    except PortInUse as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# -- report tables --------------------------------------------------------------


def _store_records_by_person(store_dir: str) -> dict[int, list[dict]]:
    from .gateway.store import Store

    store = Store(store_dir)
    out = {}
    for node_id in store.node_ids():
        records = [
            r
            for r in store.node(node_id).iter_records()
            if "SENSOR_FAULT" not in r.get("flags", ())
        ]
        if records:
            out[node_id] = records
    return out


def _cmd_tables(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    parameters = [args.parameter] if args.parameter else list(PARAMETERS)

    if args.corpus:
        reports = {p: table_report_from_corpus(p) for p in parameters}
    else:
        by_person = _store_records_by_person(args.store)
        if not by_person:
            print(f"no data in store {args.store}", file=sys.stderr)
            return EXIT_RUNTIME
        reports = {p: table_report_from_records(p, by_person) for p in parameters}

    gappy = False
    for parameter, report in reports.items():
        write_table_csv(report, out_dir / f"table_{parameter}.csv")
        write_series_csv(report, out_dir / f"series_{parameter}.csv")
        write_table_json(report, out_dir / f"table_{parameter}.json")
        status = "complete" if report.complete else "GAPS"
        gappy |= not report.complete
        print(f"{parameter}: wrote table_{parameter}.csv series_{parameter}.csv [{status}]")
    return EXIT_MISMATCH if gappy else EXIT_OK


# -- corpus validate ---------------------------------------------------------------


def _cmd_validate(args) -> int:
    if args.file:
        rows = load_corpus(Path(args.file).read_text(encoding="utf-8"))
    else:
        rows = load_corpus()

    problems = []
    for row in rows:
        try:
            validate_sample(
                node_id=row.participant,
                seq=0,
                body_temp=float(row.body_temp),
                ambient_temp=float(row.ambient_temp),
                humidity=float(row.humidity),
                air_quality=float(row.air_quality),
                heart_rate=row.heart_rate,
                received_at=0,
            )
        except SampleValidationError as exc:
            problems.extend(
                f"person {row.participant} hour {row.hour}: {v}" for v in exc.violations
            )
    problems.extend(validate_corpus(rows))

    if problems:
        print("corpus validation FAILED:")
        for problem in problems:
            print(f"  {problem}")
        return EXIT_MISMATCH
    humidity = table_report_from_corpus("humidity", rows)
    print("corpus validation OK: all Average rows match the reference tables")
    print(f"grand humidity mean = {grand_mean(humidity)} (expected {EXPECTED_GRAND_HUMIDITY_MEAN})")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper())
    try:
        if args.command == "node":
            return _cmd_simulate(args)
        if args.command == "gateway":
            return _cmd_serve(args)
        if args.command == "report":
            return _cmd_tables(args)
        if args.command == "corpus":
            return _cmd_validate(args)
    except KeyboardInterrupt:
        return EXIT_OK
    except Exception as exc:  # surfaced, not swallowed: scripts need the exit code
        logging.getLogger("vitalsgate").exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
