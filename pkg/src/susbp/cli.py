"""Command-line entry point.

Subcommands: model validate | bpmn fragments | log stats | log conform |
sense ingest | sense detect | sense energy | indicator compute |
report build | simulate | serve.

Exit codes: 0 success, 1 domain error (validation failures; conformance
findings only under --strict), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import bpmn, eventlog, indicators, metamodel, report, simulate
from .errors import DomainError
from .monitor import SessionConfig
from .sensors import (
    DetectionParams,
    Stay,
    default_schema,
    detect_hygiene_episodes,
    energy_summary,
    ingest,
    load_schema_json,
)
from .timeutil import parse_rfc3339_ms


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _schema_for(name: str):
    if name.endswith(".json") and Path(name).exists():
        return load_schema_json(_read(name))
    return default_schema(name)


def _params(args) -> DetectionParams:
    if getattr(args, "params", None):
        return DetectionParams.from_json(_read(args.params))
    return DetectionParams()


# -- subcommand handlers ------------------------------------------------------


def _cmd_model_validate(args) -> int:
    try:
        doc = json.loads(_read(args.file))
        model = metamodel._decode(doc)
    except metamodel.ModelSyntaxError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return 1
    violations = metamodel.validate_model(model)
    if args.format == "json":
        _emit(
            json.dumps(
                [{"subject": v.subject, "rule": v.rule} for v in violations], indent=2
            ),
            args.out,
        )
    else:
        for v in violations:
            print(f"{v.subject}: {v.rule}")
    if violations:
        print(f"{len(violations)} violation(s)", file=sys.stderr)
        return 1
    print("ok", file=sys.stderr)
    return 0


def _cmd_bpmn_fragments(args) -> int:
    model = bpmn.parse_bpmn(_read(args.file))
    values = args.values.split(",") if args.values else []
    if args.hygiene:
        fragments = bpmn.hygiene_fragments(model, args.hygiene, values)
    elif args.nodes:
        fragments = [bpmn.extract_fragment(model, args.nodes.split(","), values)]
    else:
        print("one of --nodes or --hygiene is required", file=sys.stderr)
        return 2
    _emit(json.dumps([f.to_json() for f in fragments], indent=2), args.out)
    return 0


def _cmd_log_stats(args) -> int:
    log = eventlog.parse_xes(_read(args.file))
    if args.dfg:
        _emit(eventlog.dfg_csv(eventlog.directly_follows(log)), args.out)
        return 0
    activities = [args.activity] if args.activity else sorted(log.activities())
    stats = [eventlog.activity_stats(log, a) for a in activities]
    if args.format == "csv":
        _emit(eventlog.stats_csv(stats), args.out)
    else:
        _emit(
            json.dumps(
                [
                    {
                        "activity": s.activity,
                        "count": s.instance_count,
                        "min_s": s.min_s,
                        "max_s": s.max_s,
                        "mean_s": s.mean_s,
                        "median_s": s.median_s,
                        "unpaired_starts": s.unpaired_starts,
                        "unpaired_completes": s.unpaired_completes,
                    }
                    for s in stats
                ],
                indent=2,
            ),
            args.out,
        )
    return 0


def _cmd_log_conform(args) -> int:
    log = eventlog.parse_xes(_read(args.file))
    spec = eventlog.NormativeSpec.from_json(json.loads(_read(args.spec)))
    result = eventlog.conformance_check(log, spec)
    _emit(
        json.dumps(
            {
                "conforming_case_fraction": result.conforming_case_fraction,
                "per_case": {
                    case: [
                        {"kind": d.kind, "position": d.position, "detail": d.detail}
                        for d in deviations
                    ]
                    for case, deviations in result.per_case.items()
                },
            },
            indent=2,
        ),
        args.out,
    )
    if args.strict and result.deviation_count() > 0:
        print(f"{result.deviation_count()} deviation(s)", file=sys.stderr)
        return 1
    return 0


def _cmd_sense_ingest(args) -> int:
    schema = _schema_for(args.schema)
    series = ingest(_read(args.file), schema)
    _emit(
        json.dumps(
            {
                channel: {
                    "device_id": s.device_id,
                    "unit": s.unit,
                    "samples": len(s),
                    "collapsed": s.collapsed_count,
                    "first": s.timestamps[0] if len(s) else None,
                    "last": s.timestamps[-1] if len(s) else None,
                }
                for channel, s in sorted(series.items())
            },
            indent=2,
        ),
        args.out,
    )
    return 0


def _load_stream_series(path: str, schema_name: str):
    return ingest(_read(path), _schema_for(schema_name))


def _cmd_sense_detect(args) -> int:
    params = _params(args)
    series = _load_stream_series(args.file, args.schema)
    scale = series.get(args.scale_channel)
    distance = series.get(args.distance_channel)
    if scale is None or distance is None:
        print(
            f"stream lacks {args.scale_channel!r} or {args.distance_channel!r} channel",
            file=sys.stderr,
        )
        return 1
    episodes = detect_hygiene_episodes(scale, distance, params)
    _emit(
        json.dumps(
            {"params": params.to_json(), "episodes": [e.to_json() for e in episodes]},
            indent=2,
        ),
        args.out,
    )
    return 0


def _cmd_sense_energy(args) -> int:
    plug = _load_stream_series(args.plug, args.plug_schema) if args.plug else {}
    hvac = _load_stream_series(args.hvac, args.hvac_schema) if args.hvac else {}
    stays = [
        Stay(
            start_ms=parse_rfc3339_ms(s["start"]),
            end_ms=parse_rfc3339_ms(s["end"]),
            n_guests=int(s.get("n_guests", 1)),
            n_days=int(s.get("n_days", 1)),
        )
        for s in json.loads(_read(args.stays))
    ]
    summary = energy_summary(plug, hvac, stays)
    _emit(json.dumps(summary.to_json(), indent=2), args.out)
    return 0


def _read_surveys(path: str) -> list[indicators.SurveyResponse]:
    rows = csv.DictReader(io.StringIO(_read(path)))
    return [
        indicators.SurveyResponse(
            case_ref=row["case_id"],
            satisfaction=float(row["S"]),
            frictions=int(row["F"]),
            perceived_time=float(row["P"]),
        )
        for row in rows
    ]


def _cmd_indicator_compute(args) -> int:
    period = tuple(args.period) if args.period else None
    if args.kind == "mcfi":
        if args.surveys:
            value = indicators.compute_mcfi(_read_surveys(args.surveys), period)
        elif None not in (args.s_bar, args.f_bar, args.p_bar):
            agg = indicators.McfiAggregates(
                s_bar=args.s_bar, f_bar=args.f_bar, p_bar=args.p_bar, f_max=0, n_surveys=0
            )
            value = indicators.mcfi_from_aggregates(agg, period)
        else:
            print("mcfi needs --surveys or --s-bar/--f-bar/--p-bar", file=sys.stderr)
            return 2
        display = f"{value.value:.2f} [{value.band_label}]"
    else:
        mode = "aggregate-average" if args.mode == "aggregate" else "per-stay"
        inputs = indicators.CfidInputs(
            e_appliances_kwh=args.e_app,
            e_hvac_kwh=args.e_hvac,
            ef_energy_kgco2e_per_kwh=args.ef,
            em_material_kgco2e=args.em,
            n_guests=args.n,
            n_days=args.d,
        )
        value = indicators.compute_cfid(inputs, mode, period)
        display = f"{value.value:.3f} {value.unit} [{value.band_label}]"
    if args.format == "json" or args.out:
        _emit(json.dumps(value.to_json(), indent=2), args.out)
    if args.format != "json":
        print(display)
    return 0


def _cmd_report_build(args) -> int:
    model = metamodel.load_model(_read(args.model))
    values = [
        indicators.IndicatorValue.from_json(obj) for obj in json.loads(_read(args.indicators))
    ]
    fragments = list(model.fragments.values())
    rep = report.build_report(
        model,
        fragments,
        values,
        observation_period=tuple(args.period) if args.period else None,
        generated_at=args.generated_at,
    )
    _emit(report.render(rep, "json"), args.out)
    if args.md:
        Path(args.md).write_text(report.render(rep, "markdown"), encoding="utf-8")
    return 0


def _cmd_simulate(args) -> int:
    script = simulate.ScenarioScript.from_json(json.loads(_read(args.script)))
    sim = simulate.generate(script)
    _emit(sim.to_jsonl(), args.out)
    if args.truth:
        Path(args.truth).write_text(
            json.dumps(sim.truth_json(), indent=2), encoding="utf-8"
        )
    return 0


def _cmd_serve(args) -> int:
    from . import server

    config = (
        SessionConfig.from_json(_read(args.config)) if args.config else SessionConfig()
    )
    host, _, port = args.bind.partition(":")
    if args.feed == "stdin":
        feed = server.stdin_feed()
    elif args.feed.startswith("tcp:"):
        feed = server.tcp_feed(int(args.feed[4:]))
    else:
        path = args.feed[5:] if args.feed.startswith("file:") else args.feed
        feed = server.file_feed(path)
    service = server.serve(
        config,
        feed,
        host=host or "127.0.0.1",
        port=int(port or 8787),
        static_dir=Path(args.static) if args.static else None,
        out_dir=Path(args.out) if args.out else None,
        speed=args.speed,
    )
    print(f"monitor listening on http://{host or '127.0.0.1'}:{service.port}", file=sys.stderr)
    try:
        while True:
            service.wait_feed(timeout=3600)
    except KeyboardInterrupt:
        service.stop()
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="susbp",
        description="Sustainability analytics for IoT-enhanced business processes.",
    )
    sub = parser.add_subparsers(dest="group", required=True)

    def common(p):
        p.add_argument("--out", help="write output to a file instead of stdout")
        p.add_argument("--format", choices=["json", "csv", "md", "text"], default="json")

    model = sub.add_parser("model", help="sustainability model operations")
    model_sub = model.add_subparsers(dest="action", required=True)
    p = model_sub.add_parser("validate", help="validate a model JSON file")
    p.add_argument("file")
    common(p)
    p.set_defaults(func=_cmd_model_validate)

    bp = sub.add_parser("bpmn", help="BPMN operations")
    bp_sub = bp.add_subparsers(dest="action", required=True)
    p = bp_sub.add_parser("fragments", help="extract fragments from a BPMN file")
    p.add_argument("file")
    p.add_argument("--nodes", help="comma-separated node ids")
    p.add_argument("--values", help="comma-separated value ids to tag")
    p.add_argument("--hygiene", help="activity name: one fragment per matching node")
    common(p)
    p.set_defaults(func=_cmd_bpmn_fragments)

    log = sub.add_parser("log", help="XES event log operations")
    log_sub = log.add_subparsers(dest="action", required=True)
    p = log_sub.add_parser("stats", help="activity statistics")
    p.add_argument("file")
    p.add_argument("--activity")
    p.add_argument("--dfg", action="store_true", help="directly-follows counts as CSV")
    common(p)
    p.set_defaults(func=_cmd_log_stats)
    p = log_sub.add_parser("conform", help="conformance against a normative spec")
    p.add_argument("file")
    p.add_argument("--spec", required=True)
    p.add_argument("--strict", action="store_true", help="exit 1 when deviations exist")
    common(p)
    p.set_defaults(func=_cmd_log_conform)

    sense = sub.add_parser("sense", help="sensor stream operations")
    sense_sub = sense.add_subparsers(dest="action", required=True)
    p = sense_sub.add_parser("ingest", help="validate and summarize a stream")
    p.add_argument("file")
    p.add_argument("--schema", default="scale", help="schema name or schema JSON path")
    common(p)
    p.set_defaults(func=_cmd_sense_ingest)
    p = sense_sub.add_parser("detect", help="detect hygiene episodes")
    p.add_argument("file")
    p.add_argument("--schema", default="hygiene_station", help="schema covering the stream channels")
    p.add_argument("--params", help="DetectionParams JSON file")
    p.add_argument("--scale-channel", default="weight_g")
    p.add_argument("--distance-channel", default="distance_mm")
    common(p)
    p.set_defaults(func=_cmd_sense_detect)
    p = sense_sub.add_parser("energy", help="energy summary over stays")
    p.add_argument("--plug", help="appliance plug stream file")
    p.add_argument("--hvac", help="HVAC stream file")
    p.add_argument("--plug-schema", default="smart_plug")
    p.add_argument("--hvac-schema", default="hvac_controller")
    p.add_argument("--stays", required=True, help="JSON list of stay windows")
    common(p)
    p.set_defaults(func=_cmd_sense_energy)

    ind = sub.add_parser("indicator", help="compute indicators")
    ind_sub = ind.add_subparsers(dest="action", required=True)
    p = ind_sub.add_parser("compute")
    p.add_argument("--kind", choices=["mcfi", "cfid"], required=True)
    p.add_argument("--surveys", help="CSV case_id,S,F,P (mcfi)")
    p.add_argument("--s-bar", type=float, dest="s_bar")
    p.add_argument("--f-bar", type=float, dest="f_bar")
    p.add_argument("--p-bar", type=float, dest="p_bar")
    p.add_argument("--mode", choices=["aggregate", "per-stay"], default="aggregate")
    p.add_argument("--e-app", type=float, dest="e_app", default=0.0)
    p.add_argument("--e-hvac", type=float, dest="e_hvac", default=0.0)
    p.add_argument("--ef", type=float, default=0.0)
    p.add_argument("--em", type=float, default=0.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--period", nargs=2, metavar=("START", "END"))
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.set_defaults(func=_cmd_indicator_compute)

    rep = sub.add_parser("report", help="sustainability reports")
    rep_sub = rep.add_subparsers(dest="action", required=True)
    p = rep_sub.add_parser("build")
    p.add_argument("--model", required=True)
    p.add_argument("--indicators", required=True, help="JSON list of indicator values")
    p.add_argument("--period", nargs=2, metavar=("START", "END"))
    p.add_argument("--generated-at", dest="generated_at")
    p.add_argument("--md", help="also render Markdown to this path")
    common(p)
    p.set_defaults(func=_cmd_report_build)

    p = sub.add_parser("simulate", help="generate a synthetic scenario stream")
    p.add_argument("--script", required=True)
    p.add_argument("--truth", help="write the ground-truth episode list here")
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="run the live monitor service")
    p.add_argument("--bind", default="127.0.0.1:8787")
    p.add_argument("--feed", default="stdin", help="file:PATH | stdin | tcp:PORT")
    p.add_argument("--speed", type=float, default=None, help="replay speed multiplier")
    p.add_argument("--config", help="SessionConfig JSON file")
    p.add_argument("--static", help="dashboard asset directory")
    p.add_argument("--out", help="directory for the end-of-session episode log")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except metamodel.ModelValidationError as exc:
        for violation in exc.violations:
            print(f"{violation.subject}: {violation.rule}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"file not found: {exc.filename}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
