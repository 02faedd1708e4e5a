"""Command-line front end: offline checking, streaming, templates, bench.

Exit codes are a stable contract: 0 when every requirement is satisfied,
1 when any anchor is violated, 2 on usage or validation errors.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys

from . import __version__
from .bench import (
    WorkloadSpec,
    format_bench_table,
    generate_workload,
    parse_modes,
    run_bench,
    write_bench_csv,
)
from .boolean import CostModel, monitor_b
from .engine import Counters
from .errors import ParseError, SastlError, StreamError, ValidationError
from .online import OnlineMonitor
from .parallel import ParallelConfig
from .parser import format_formula
from .quantitative import monitor_q
from .reports import Report, report_line, verdict_report_line
from .requirements import (
    anchor_locations,
    anchor_samples,
    load_requirements,
    signal_consistency,
)
from .signal import Labeling, Record, SpatialGraph, infer_step, normalize_frequency, read_signal_csv
from .spatial import load_or_build_index
from .templates import TranslateConfig, template_from_json, translate_template

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_ERROR = 2


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("SASTL_WORKERS")
    return int(env) if env else 1


def _parallel(args) -> ParallelConfig | None:
    workers = _workers(args)
    return ParallelConfig(worker_count=workers) if workers > 1 else None


def _load_deployment(args):
    graph = SpatialGraph.from_json(args.graph)
    labeling = Labeling.from_json(args.labels)
    requirements = load_requirements(args.requirements)
    return graph, labeling, requirements


def cmd_check(args) -> int:
    graph, labeling, requirements = _load_deployment(args)
    records = read_signal_csv(args.signal)
    step = args.step if args.step is not None else infer_step(records)
    signal = normalize_frequency(records, step)

    signal_consistency(signal, graph.nodes, source=str(args.signal))
    requirements.validate_against(
        variables=set(signal.variables),
        propositions=set(labeling.propositions),
        location_count=graph.node_count,
    )

    index = load_or_build_index(graph, args.index_cache)
    parallel = _parallel(args)
    out = _open_output(args.output)
    any_violation = False
    try:
        for req in requirements:
            core = req.core
            cost_model = CostModel(index, labeling) if not args.no_reorder else None
            for t in anchor_samples(req, signal.grid):
                for loc in anchor_locations(req, graph.nodes, labeling):
                    counters = Counters()
                    verdict = monitor_b(
                        core, signal, t, loc, index, labeling,
                        reorder=not args.no_reorder, counters=counters,
                        parallel=parallel, cost_model=cost_model,
                    )
                    any_violation = any_violation or not verdict.satisfied
                    shown = counters if args.counters else None
                    anchor_time = signal.grid.time_at(t)
                    if args.boolean_only:
                        line = verdict_report_line(
                            req.name, anchor_time, loc, verdict.satisfied, verdict.vacuous, shown
                        )
                    else:
                        rob = monitor_q(
                            core, signal, t, loc, index, labeling,
                            counters=counters, parallel=parallel,
                        )
                        report = Report(
                            req.name, anchor_time, loc, verdict.satisfied, verdict.vacuous, rob
                        )
                        line = report_line(report, shown)
                    print(line, file=out)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_VIOLATION if any_violation else EXIT_OK


def _record_from_line(line: str) -> Record:
    obj = json.loads(line)
    value = obj.get("value")
    return Record(
        float(obj["t"]),
        str(obj["location"]),
        str(obj["variable"]),
        None if value is None else float(value),
    )


def _stream_lines(args):
    if args.input == "stdin":
        yield from sys.stdin
        return
    if args.input.startswith("tcp:"):
        port = int(args.input.split(":", 1)[1])
        server = socket.create_server(("", port))
        conn, _ = server.accept()
        with conn, server, conn.makefile("r") as fh:
            yield from fh
        return
    raise SastlError(f"unknown stream input {args.input!r} (use stdin or tcp:PORT)")


def cmd_stream(args) -> int:
    graph, labeling, requirements = _load_deployment(args)
    requirements.validate_against(propositions=set(labeling.propositions),
                                  location_count=graph.node_count)
    monitor = OnlineMonitor(
        requirements, graph, labeling, args.step, parallel=_parallel(args)
    )
    out = _open_output(args.output)
    skipped = 0
    any_violation = False
    try:
        for raw in _stream_lines(args):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = _record_from_line(raw)
            except (ValueError, KeyError, TypeError):
                skipped += 1
                print(f"skipped malformed record: {raw[:120]}", file=sys.stderr)
                continue
            try:
                reports = monitor.feed([record])
            except StreamError as exc:
                skipped += 1
                print(f"skipped record: {exc}", file=sys.stderr)
                continue
            any_violation = _print_reports(reports, out) or any_violation
        any_violation = _print_reports(monitor.finish(), out) or any_violation
    finally:
        if out is not sys.stdout:
            out.close()
    if skipped:
        print(f"{skipped} record(s) skipped", file=sys.stderr)
    return EXIT_VIOLATION if any_violation else EXIT_OK


def _print_reports(reports, out) -> bool:
    violated = False
    for report in reports:
        print(report_line(report), file=out)
        violated = violated or not report.satisfied
    return violated


def cmd_translate(args) -> int:
    with open(args.template) as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "templates" in data:
        config = TranslateConfig(
            constants=data.get("constants", {}),
            unit_scale=float(data.get("unit_scale", 1.0)),
            default_horizon=float(data.get("default_horizon", 24.0)),
        )
        templates = data["templates"]
    else:
        config = TranslateConfig()
        templates = [data]
    formulas = [translate_template(template_from_json(t), config) for t in templates]
    if args.check:
        if not args.labels:
            raise SastlError("--check needs --labels to validate propositions against")
        labeling = Labeling.from_json(args.labels)
        from .formula import validate_formula

        for f in formulas:
            validate_formula(f, propositions=set(labeling.propositions))
    for f in formulas:
        print(format_formula(f))
    return EXIT_OK


def cmd_bench(args) -> int:
    poi = {}
    for item in args.poi:
        label, _, density = item.partition("=")
        if not density:
            raise SastlError(f"--poi takes Label=density, got {item!r}")
        poi[label] = float(density)
    variables = {}
    for item in args.var:
        name, _, bounds = item.partition("=")
        lo, _, hi = bounds.partition(":")
        if not (name and lo and hi):
            raise SastlError(f"--var takes NAME=LO:HI, got {item!r}")
        variables[name] = (float(lo), float(hi))
    spec = WorkloadSpec(
        node_count=args.nodes,
        topology=args.topology,
        poi_labels=poi,
        sample_count=args.samples,
        seed=args.seed,
        variables=variables or {"pm": (0.0, 200.0)},
    )
    graph, labeling, signal = generate_workload(spec)
    requirements = load_requirements(args.requirements)
    requirements.validate_against(
        variables=set(signal.variables),
        propositions=set(labeling.propositions) or None,
        location_count=graph.node_count,
    )
    rows = run_bench(
        graph, labeling, signal, requirements, parse_modes(args.modes.split(",")),
        repeats=args.repeats,
    )
    print(format_bench_table(rows))
    if args.csv:
        write_bench_csv(rows, args.csv)
        print(f"wrote {args.csv}", file=sys.stderr)
    return EXIT_OK


def _open_output(path):
    return sys.stdout if path is None else open(path, "w")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sastl",
        description="Monitor spatial-temporal requirements over multi-location traces.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="offline check of a complete trace")
    check.add_argument("requirements", help="requirements JSON file")
    check.add_argument("signal", help="trace CSV (time,location,variable,value)")
    check.add_argument("graph", help="location graph JSON")
    check.add_argument("labels", help="location labels JSON")
    check.add_argument("--step", type=float, default=None,
                       help="grid step in time units (default: inferred)")
    check.add_argument("--workers", type=int, default=None,
                       help="spatial worker processes (env SASTL_WORKERS)")
    check.add_argument("--no-reorder", action="store_true",
                       help="disable cost-driven conjunction reordering")
    check.add_argument("--boolean-only", action="store_true",
                       help="skip robustness, report Boolean verdicts only")
    check.add_argument("--counters", action="store_true",
                       help="attach evaluation counters to each report")
    check.add_argument("--index-cache", default=None,
                       help="directory for the distance-table cache")
    check.add_argument("--output", default=None, help="report file (default stdout)")
    check.set_defaults(func=cmd_check)

    stream = sub.add_parser("stream", help="online monitoring of a record stream")
    stream.add_argument("requirements")
    stream.add_argument("graph")
    stream.add_argument("labels")
    stream.add_argument("--step", type=float, required=True, help="grid step in time units")
    stream.add_argument("--input", default="stdin",
                        help="record source: stdin (default) or tcp:PORT")
    stream.add_argument("--workers", type=int, default=None)
    stream.add_argument("--output", default=None)
    stream.set_defaults(func=cmd_stream)

    translate = sub.add_parser("translate", help="structured template to formula text")
    translate.add_argument("template", help="template JSON file")
    translate.add_argument("--check", action="store_true",
                           help="validate the result against --labels")
    translate.add_argument("--labels", default=None)
    translate.set_defaults(func=cmd_translate)

    bench = sub.add_parser("bench", help="time engine modes on a synthetic city")
    bench.add_argument("requirements")
    bench.add_argument("--nodes", type=int, default=100)
    bench.add_argument("--topology", choices=["lattice", "random-geometric"],
                       default="lattice")
    bench.add_argument("--poi", action="append", default=[],
                       metavar="LABEL=DENSITY")
    bench.add_argument("--var", action="append", default=[], metavar="NAME=LO:HI",
                       help="workload variable with a uniform value range "
                            "(default pm=0:200)")
    bench.add_argument("--samples", type=int, default=100)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--modes", default="standard,reordered,parallel4")
    bench.add_argument("--repeats", type=int, default=3)
    bench.add_argument("--csv", default=None, help="also write the table as CSV")
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        span = getattr(exc, "span", None)
        where = f" at line {span.line}, column {span.column}" if span else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_ERROR
    except (SastlError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
