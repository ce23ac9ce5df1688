"""Command-line interface: batch runs, design inspection, reports, replays."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from .report import render_report, runs_row, write_points_csv, write_runs_csv
from .runner import (
    DEFAULT_SEED,
    RunConfig,
    config_from_scenario,
    run_many,
    run_scenario,
)
from .scenarios import DEFAULT_TRANSFER_BYTES, FAMILIES, design_scenarios
from .trace import LEVEL_FULL


def _parse_ab_limit(text: str) -> Optional[int]:
    return None if text == "inf" else int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpquicsim",
        description="Multipath transport simulator: packet number space studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a batch over a scenario design")
    run_p.add_argument("--family", required=True, choices=FAMILIES)
    run_p.add_argument("--design", default="spns", choices=("spns", "mpns"))
    run_p.add_argument("--cc", default="cubic", choices=("cubic", "bbr"))
    run_p.add_argument(
        "--ab-limit", default="32", choices=("4", "8", "16", "32", "inf")
    )
    run_p.add_argument(
        "--strategy",
        default="largest-first",
        choices=("largest-first", "lowest-first"),
    )
    run_p.add_argument(
        "--dispatch", default="on-path", choices=("on-path", "duplicate")
    )
    run_p.add_argument("--pquic-mode", action="store_true")
    run_p.add_argument(
        "--size", type=int, default=DEFAULT_TRANSFER_BYTES, metavar="BYTES"
    )
    run_p.add_argument("--points", type=int, default=95, metavar="N")
    run_p.add_argument("--seed", type=int, default=DEFAULT_SEED, metavar="S")
    run_p.add_argument("--out", required=True, metavar="DIR")
    run_p.add_argument("--jobs", type=int, default=1, metavar="N")
    run_p.add_argument(
        "--no-traces", action="store_true", help="skip per-run trace files"
    )

    design_p = sub.add_parser("design", help="print a family's design points")
    design_p.add_argument("--family", required=True, choices=FAMILIES)
    design_p.add_argument("--points", type=int, default=95, metavar="N")
    design_p.add_argument("--seed", type=int, default=DEFAULT_SEED, metavar="S")
    design_p.add_argument("--out", metavar="DIR", help="also write points.csv")

    report_p = sub.add_parser("report", help="summarize a result directory")
    report_p.add_argument("--in", dest="in_dir", required=True, metavar="DIR")
    report_p.add_argument("--csv", action="store_true")
    report_p.add_argument("--svg", action="store_true")

    replay_p = sub.add_parser("replay", help="run one config with a full trace")
    replay_p.add_argument("--config", required=True, metavar="FILE")
    replay_p.add_argument("--out", default=".", metavar="DIR")
    return parser


def _cmd_run(args) -> int:
    points, scenarios = design_scenarios(args.family, args.points, args.seed)
    overrides = dict(
        design=args.design,
        cc=args.cc,
        ab_limit=_parse_ab_limit(args.ab_limit),
        strategy=args.strategy,
        dispatch=args.dispatch,
        pquic_mode=args.pquic_mode,
        size_bytes=args.size,
        seed=args.seed,
    )
    cfgs = [config_from_scenario(s, **overrides) for s in scenarios]
    os.makedirs(args.out, exist_ok=True)
    trace_paths: List[Optional[str]] = [None] * len(cfgs)
    if not args.no_traces:
        traces_dir = os.path.join(args.out, "traces")
        os.makedirs(traces_dir, exist_ok=True)
        trace_paths = [
            os.path.join(traces_dir, f"run-{cfg.run_id()}.jsonl") for cfg in cfgs
        ]
    results = run_many(cfgs, trace_paths, jobs=args.jobs)
    rows = [runs_row(cfg, m) for cfg, m in zip(cfgs, results)]
    write_runs_csv(os.path.join(args.out, "runs.csv"), rows, append=True)
    write_points_csv(
        os.path.join(args.out, "points.csv"),
        args.family,
        args.seed,
        points,
        scenarios,
        append=True,
    )
    for cfg, m in zip(cfgs, results):
        print(
            f"{cfg.run_id()}  time={m.transfer_time_s:.3f}s"
            f"  mean_ranges={m.mean_ranges_per_ack_frame:.2f}"
            f"  rel_retrans={m.rel_retransmitted:.4f}"
            f"  drops={m.buffer_drops}"
        )
    print(f"wrote {len(rows)} runs to {os.path.join(args.out, 'runs.csv')}")
    return 0


def _cmd_design(args) -> int:
    points, scenarios = design_scenarios(args.family, args.points, args.seed)
    for scenario in scenarios:
        paths = "  ".join(
            f"({p.bandwidth_mbps:.2f} Mbps, {p.rtt_ms:.2f} ms)"
            for p in scenario.paths
        )
        print(f"{scenario.index:3d}  {paths}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "points.csv")
        write_points_csv(path, args.family, args.seed, points, scenarios)
        print(f"wrote {path}")
    return 0


def _cmd_report(args) -> int:
    write_csv = args.csv or not (args.csv or args.svg)
    write_svg = args.svg or not (args.csv or args.svg)
    for path in render_report(args.in_dir, write_csv, write_svg):
        print(f"wrote {path}")
    return 0


def _cmd_replay(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        cfg = RunConfig.from_json(fh.read())
    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, f"run-{cfg.run_id()}.jsonl")
    metrics = run_scenario(cfg, trace_path, trace_level=LEVEL_FULL)
    print(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
    print(f"full trace: {trace_path}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "design": _cmd_design,
        "report": _cmd_report,
        "replay": _cmd_replay,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
