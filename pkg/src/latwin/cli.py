"""Command-line harness: seeded sweeps, trace replay, and the oracle suite.

Sweeps write ``<out>/<sweep>.csv`` (byte-deterministic for a fixed seed and
config; pass --timings to include wall-clock columns, which breaks that) and
``<out>/<sweep>_summary.json`` with per-seed detail and reference trend
values.
"""

from __future__ import annotations

import argparse
import json
import sys

from .engine import LatWinEngine, read_delivery_jsonl, write_report_jsonl
from .experiments import (
    emit,
    run_benefit_sweep,
    run_delay_sweep,
    run_n_sweep,
    run_window_sweep,
)
from .oracle import run_equivalence_suite
from .simulate import SimConfig


def _parse_values(spec: str, cast=float) -> list:
    """Sweep values from "a:b" (inclusive integer range) or "x,y,z"."""
    spec = spec.strip()
    if ":" in spec:
        lo, hi = spec.split(":")
        return [cast(v) for v in range(int(lo), int(hi) + 1)]
    return [cast(v) for v in spec.split(",") if v.strip()]


def _load_config(args: argparse.Namespace) -> SimConfig:
    cfg = SimConfig.from_json_file(args.config) if args.config else SimConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="SimConfig JSON path")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--seeds", type=int, default=10, help="seeds per sweep point")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="parallel worker count")
    parser.add_argument(
        "--timings", action="store_true",
        help="include wall-clock columns in the CSV (not byte-deterministic)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latwin",
        description="Windowed CGS lattice maintenance: sweeps, replay, oracle checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("benefit", help="window-size sweep against the full-lattice baseline")
    _add_common(p)
    p.add_argument("--w-values", default="1:10")
    p.add_argument("--lat-budget", type=int, default=500_000)

    p = sub.add_parser("delay", help="mean message delay sweep")
    _add_common(p)
    p.add_argument("--delays", default="0,0.5,1,2,3.5,5")

    p = sub.add_parser("window", help="window-size sweep (windowed metrics only)")
    _add_common(p)
    p.add_argument("--w-values", default="2:5")

    p = sub.add_parser("nprocs", help="process-count sweep")
    _add_common(p)
    p.add_argument("--n-values", default="2:6")

    p = sub.add_parser("replay", help="drive an engine from a JSON-lines trace file")
    p.add_argument("--trace", required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--report", help="write per-advance update reports (JSON lines)")
    p.add_argument("--export-lattice", help="write the final node/edge sets as JSON")

    p = sub.add_parser("oracle-check", help="randomized engine-vs-oracle equivalence suite")
    p.add_argument("--traces", type=int, default=100)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--max-events", type=int, default=25)
    p.add_argument("--out", help="also write the counters as JSON")

    return parser


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if args.command == "benefit":
        rows = run_benefit_sweep(
            cfg,
            _parse_values(args.w_values, int),
            seeds=args.seeds,
            lat_budget=args.lat_budget,
            workers=args.workers,
        )
    elif args.command == "delay":
        rows = run_delay_sweep(cfg, _parse_values(args.delays), seeds=args.seeds, workers=args.workers)
    elif args.command == "window":
        rows = run_window_sweep(cfg, _parse_values(args.w_values, int), seeds=args.seeds, workers=args.workers)
    else:
        rows = run_n_sweep(cfg, _parse_values(args.n_values, int), seeds=args.seeds, workers=args.workers)
    csv_path, json_path = emit(rows, args.out, args.command, timings=args.timings)
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    with open(args.trace) as fp:
        states = list(read_delivery_jsonl(fp))
    if not states:
        print("trace file holds no states", file=sys.stderr)
        return 2
    n = len(states[0].clock)
    engine = LatWinEngine(n, args.window)
    reports = []
    for state in states:
        reports.extend(engine.receive(state))
    if args.report:
        with open(args.report, "w") as fp:
            write_report_jsonl(reports, fp)
    if args.export_lattice:
        snap = engine.snapshot()
        doc = {
            "n": n,
            "nodes": [list(v) for v in sorted(snap.nodes)],
            "edges": sorted([list(a), list(b)] for a, b in snap.edges()),
        }
        with open(args.export_lattice, "w") as fp:
            json.dump(doc, fp, indent=2, sort_keys=True)
            fp.write("\n")
    snap = engine.snapshot()
    print(
        f"states={len(states)} advances={engine.stats.advances} "
        f"duplicates={engine.stats.duplicates} nodes={len(snap.nodes)} "
        f"max_nodes={engine.stats.max_nodes} "
        f"c_min={list(snap.c_min) if snap.c_min else None} "
        f"c_max={list(snap.c_max) if snap.c_max else None}"
    )
    return 0


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    result = run_equivalence_suite(args.traces, args.seed, max_events=args.max_events)
    print(result.summary())
    print("PASS" if result.ok else "FAIL")
    if args.out:
        with open(args.out, "w") as fp:
            json.dump(result.__dict__, fp, indent=2, sort_keys=True)
            fp.write("\n")
    return 0 if result.ok else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("benefit", "delay", "window", "nprocs"):
            return _cmd_sweep(args)
        if args.command == "replay":
            return _cmd_replay(args)
        return _cmd_oracle_check(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
