"""Command line entry points: simulate, run, eval, live."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import worlds
from .config import load_config
from .detectors import make_detector
from .harness import compute_roc, live_mode, run_sequence
from .reports import emit_reports, read_results_csv, write_results_csv
from .scanlog import read_log, read_merge_specs, write_log
from .simulate import run_scenario


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="key/value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config entry (repeatable)")


def _config_from(args) -> "Config":
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return load_config(args.config, overrides)


def _detectors_from(args, cfg):
    names = args.detectors.split(",") if args.detectors else list(cfg.run.detectors)
    return [make_detector(name.strip(), cfg) for name in names if name.strip()]


def cmd_simulate(args) -> int:
    cfg = _config_from(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenarios = []
    if args.suite:
        scenarios = worlds.roc_suite(args.sequences, args.seed)
    for name in args.scenario or []:
        if name not in worlds.SCRIPTED:
            raise SystemExit(
                f"unknown scenario {name!r}; available: {', '.join(sorted(worlds.SCRIPTED))}"
            )
        scenarios.append(worlds.SCRIPTED[name]())
    if not scenarios:
        raise SystemExit("nothing to simulate: pass --scenario and/or --suite")
    for i, sc in enumerate(scenarios):
        sensor = sc.sensor if args.config is None and not args.set else cfg.sensor
        log = run_scenario(sc.world, sc.script, sensor, args.seed + i)
        log.name = sc.name
        path = out / f"{sc.name}.jsonl"
        write_log(log, path)
        print(f"wrote {path} ({log.scan_count()} scans, label={sc.label})")
    return 0


def cmd_run(args) -> int:
    cfg = _config_from(args)
    detectors_names = args.detectors
    logs = []
    for item in args.log:
        p = Path(item)
        if p.is_dir():
            logs += sorted(p.glob("*.jsonl"))
        else:
            logs.append(p)
    if not logs:
        raise SystemExit("no logs given")
    extra = read_merge_specs(args.merge_spec) if args.merge_spec else None
    results = []
    for path in logs:
        detectors = _detectors_from(args, cfg)  # fresh state per sequence
        log = read_log(path)
        result = run_sequence(log, detectors, cfg, extra_specs=extra)
        results.append(result)
        scores = ", ".join(f"{d}={result.max_score[d]:.3f}" for d in sorted(result.max_score))
        print(f"{result.sequence_id}: label={result.label} {scores}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(results, out / "results.csv")
    print(f"wrote {out / 'results.csv'}")
    return 0


def cmd_eval(args) -> int:
    results_path = Path(args.results)
    if results_path.is_dir():
        results_path = results_path / "results.csv"
    results = read_results_csv(results_path)
    detectors = sorted({d for r in results for d in r.max_score})
    curves = [compute_roc(results, det) for det in detectors]
    out = Path(args.out)
    emit_reports(results, curves, out)
    for c in curves:
        print(f"{c.detector}: AUC = {c.auc:.4f}")
    print(f"wrote roc.csv, summary.csv, roc.svg to {out}")
    return 0


def cmd_live(args) -> int:
    cfg = _config_from(args)
    detectors = _detectors_from(args, cfg)
    log = read_log(args.log)
    extra = read_merge_specs(args.merge_spec) if args.merge_spec else None
    events = live_mode(log, detectors, cfg, extra_specs=extra)
    lines = [
        json.dumps(
            {
                "event": e.kind,
                "ordinal": e.ordinal,
                "vertex_id": e.vertex_id,
                "detector": e.detector,
                "score": e.score,
            }
        )
        for e in events
    ]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(events)} events to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mergeguard",
        description="Pose-graph map merging with online invalid-merge detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate scan logs from scripted/random scenarios")
    p.add_argument("--scenario", action="append", help="scripted scenario name (repeatable)")
    p.add_argument("--suite", action="store_true", help="generate the balanced ROC suite")
    p.add_argument("--sequences", type=int, default=60, help="suite size (with --suite)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory for .jsonl logs")
    _add_common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("run", help="run detectors over scan logs (evaluation mode)")
    p.add_argument("--log", action="append", required=True,
                   help="scan log file or directory (repeatable)")
    p.add_argument("--merge-spec", type=Path, default=None,
                   help="extra forced merges (JSONL merge_trigger records)")
    p.add_argument("--detectors", default=None, help="comma list, default from config")
    p.add_argument("--out", required=True, help="output directory for results.csv")
    _add_common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("eval", help="ROC curves and summary from results.csv")
    p.add_argument("--results", required=True, help="results.csv or its directory")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("live", help="replay a log with unmerge-on-alarm enabled")
    p.add_argument("--log", required=True)
    p.add_argument("--merge-spec", type=Path, default=None)
    p.add_argument("--detectors", default="change")
    p.add_argument("--out", default=None, help="write the event log here (JSONL)")
    _add_common(p)
    p.set_defaults(fn=cmd_live)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
