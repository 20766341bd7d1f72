"""Sweep harness: detection/space/time metrics against the full-lattice baseline.

Detection counting uses an episode monitor on both the windowed lattice and
the unbounded baseline: a detection fires when the property's modality holds
over the region above the last decision point, and the monitor re-arms only
once the property has definitely stopped holding there.  On the windowed
side the region floor is clipped into the current window, so for windows
shorter than the spacing between property episodes this coincides with plain
false-to-true verdict transitions (also reported); on the unbounded side the
floor is what keeps long-dead evidence from pinning the verdict forever.

Metric definitions per seed, with counts taken after every advance:

* ``perc_det``  = windowed detections / baseline detections;
* ``perc_s``    = windowed node-count sum / baseline node-count sum
  (ratio of the average lattice sizes over the same advances);
* ``prob_det``  = physical-truth detections / windowed detections, where the
  physical verdict asks whether the conjunction truly held at some instant
  of the window's physical span;
* ``s_latwin``  = mean windowed node count per advance;
* ``t_latwin``  = mean wall-clock per advance including detection (reported
  informationally; excluded from deterministic CSV output by default).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .detection import (
    Modality,
    Property,
    _definitely,
    _possibly,
    restrict_view,
)
from .engine import LatWinEngine, LatWinView, NodeBudgetExceeded, ReorderQueue
from .lattice import Vec, concurrency_matrix
from .simulate import ActivityTimeline, SimConfig, deliver, generate
from .trace import Trace

CSV_HEADER = "sweep,param,seed_count,perc_det,perc_s,prob_det,s_latwin,t_latwin_us,theta_fit"

# Trend anchors from the original evaluation of this algorithm family;
# recorded in the JSON summary for orientation, never asserted as targets.
REFERENCE_VALUES = {
    "perc_det_at_w4": 0.9711,
    "perc_s_at_w10_below": 0.01,
    "prob_det_floor": 0.85,
    "theta": 0.75,
    "s_latwin_by_n": {"2": 9, "3": 25, "4": 78, "5": 221, "6": 768, "7": 2691, "8": 9799, "9": 34408},
}


class EpisodeMonitor:
    """Windowed detection counter with re-arm hysteresis.

    ``observe`` is called once per advance with the fresh snapshot and a
    node-satisfaction predicate.  While idle, a detection fires when the
    property holds (under its modality) over the nodes dominating the floor;
    the monitor then waits until the negated conjunction definitely holds
    there before re-arming.  The floor is the lattice maximum at the last
    flip, clipped to the window's lower bounds so a fully slid-past floor
    imposes nothing.  Plain per-advance verdict transitions (no hysteresis,
    no floor) are counted alongside.
    """

    def __init__(self, prop: Property):
        self.prop = prop
        self.base: Vec | None = None
        self.active = False
        self.count = 0
        self.plain_count = 0
        self._plain_prev = False

    def observe(
        self,
        view: LatWinView,
        satisfies: Callable[[Vec], bool],
        may_satisfy: bool = True,
        may_violate: bool = True,
    ) -> bool:
        """One monitoring step.  ``may_satisfy``/``may_violate`` are cheap
        window-level prechecks (no satisfying flag anywhere / all flags
        true); they and the early exits below assume engine views, whose
        minimum-to-maximum cover connectivity makes an all-(non)satisfying
        node set decide the verdict without a walk."""
        possibly = self.prop.modality is Modality.POSSIBLY

        def holds_over(v: LatWinView) -> bool:
            if v.is_empty or not may_satisfy:
                return False
            if possibly:
                return _possibly(v, satisfies)
            if satisfies(v.c_min):
                return True
            if not _possibly(v, satisfies):
                return False
            return _definitely(v, satisfies)

        plain = holds_over(view)
        if plain and not self._plain_prev:
            self.plain_count += 1
        self._plain_prev = plain

        region = view
        if self.base is not None and not view.is_empty:
            los = tuple(view.window_min_index(k) for k in range(view.n))
            floor = tuple(max(b, lo) for b, lo in zip(self.base, los))
            if floor == los:
                # The window slid wholly past the last decision point; the
                # floor no longer constrains anything.
                self.base = None
            else:
                region = restrict_view(view, floor)
        fired = False
        if not self.active:
            holds = plain if region is view else holds_over(region)
            if holds:
                self.count += 1
                self.active = True
                self.base = view.c_max
                fired = True
        else:
            stopped = False
            if may_violate and not region.is_empty:
                def violates(v: Vec) -> bool:
                    return not satisfies(v)

                if violates(region.c_min):
                    stopped = True
                elif _possibly(region, violates):
                    stopped = _definitely(region, violates)
            if stopped:
                self.active = False
                self.base = view.c_max
        return fired


class BaselineMonitor:
    """Episode monitor over the unbounded engine, evaluated incrementally.

    Maintains, per re-arm region, which nodes are reachable from the region
    minimum through only non-satisfying (and only satisfying) nodes.  Nodes
    never gain predecessors on an unbounded lattice, so each is classified
    exactly once; a flip resets the region to the current maximum.
    """

    _UNSAT = 1
    _SAT = 2

    def __init__(self, engine: LatWinEngine, prop: Property):
        self.engine = engine
        self.prop = prop
        self.base: Vec | None = None
        self.active = False
        self.count = 0
        self._bits: dict[Vec, int] = {}
        self._any_sat = False

    def _satisfies(self, vec: Vec) -> bool:
        states = self.engine.nodes[vec].states
        return all(s.payload[name] for s, name in zip(states, self.prop.locals))

    def _flip(self, new_base: Vec) -> None:
        self.base = new_base
        sat = self._satisfies(new_base)
        self._bits = {new_base: self._SAT if sat else self._UNSAT}
        self._any_sat = sat

    def observe(self, added: Sequence[Vec]) -> bool:
        # ``added`` comes lexicographically sorted, which is a topological
        # order: every predecessor is lexicographically smaller.
        base = self.base
        bits_map = self._bits
        nodes = self.engine.nodes
        names = self.prop.locals
        n = self.engine.n
        for vec in added:
            if base is not None and any(v < b for v, b in zip(vec, base)):
                continue
            minimum = base if base is not None else self.engine.c_min.vec
            states = nodes[vec].states
            sat = True
            for s, name in zip(states, names):
                if not s.payload[name]:
                    sat = False
                    break
            if vec == minimum:
                bits = self._SAT if sat else self._UNSAT
            else:
                bits = 0
                for j in range(n):
                    pb = bits_map.get(vec[:j] + (vec[j] - 1,) + vec[j + 1 :])
                    if pb:
                        bits |= pb
                        if bits == 3:
                            break
                bits &= self._SAT if sat else self._UNSAT
            bits_map[vec] = bits
            self._any_sat = self._any_sat or sat
        if self.engine.c_max is None:
            return False
        top = self.engine.c_max.vec
        top_bits = self._bits.get(top, 0)
        fired = False
        if not self.active:
            if self.prop.modality is Modality.POSSIBLY:
                holds = self._any_sat
            else:
                holds = not top_bits & self._UNSAT
            if holds:
                self.count += 1
                self.active = True
                fired = True
                self._flip(top)
        elif not top_bits & self._SAT:
            # The negated conjunction definitely holds above the region
            # minimum: no all-satisfying path reaches the frontier.
            self.active = False
            self._flip(top)
        return fired


# -- single runs -------------------------------------------------------------


@dataclass
class WindowedRunStats:
    advances: int = 0
    node_sum: int = 0
    max_nodes: int = 0
    detections_def: int = 0
    detections_pos: int = 0
    transitions_def: int = 0
    transitions_pos: int = 0
    physical_detections: int = 0
    physical_transitions: int = 0
    max_grow_candidates: int = 0
    max_pruned: int = 0
    t_advance_mean_us: float = 0.0

    @property
    def s_latwin(self) -> float:
        return self.node_sum / self.advances if self.advances else 0.0


def run_windowed(
    trace: Trace, schedule: Sequence[tuple[float, object]], w: int | None
) -> WindowedRunStats:
    """Replay one delivery schedule through a windowed engine, counting
    detections, physical-truth detections, and per-advance cost."""
    n = trace.n
    engine = LatWinEngine(n, w, store_edges=False)
    names = ("active",) * n
    def_mon = EpisodeMonitor(Property.conjunction(n, modality=Modality.DEFINITELY))
    pos_mon = EpisodeMonitor(Property.conjunction(n, modality=Modality.POSSIBLY))
    timeline = ActivityTimeline.build(trace, names)
    intervals = trace.intervals()
    stats = WindowedRunStats()
    # The physical counter mirrors the lattice monitor: fire on a true
    # instant past the last decision frontier, re-arm on a false one.
    phys_marker = -math.inf
    phys_active = False
    phys_plain_prev = False
    t_total = 0.0
    # Satisfaction flags mirror the window buffers; one window moves per
    # advance, so maintenance is O(1) amortised.
    flags: list[list[bool]] = [[] for _ in range(n)]
    los = [0] * n

    def satisfies(vec: Vec) -> bool:
        for k, v in enumerate(vec):
            if not flags[k][v - los[k]]:
                return False
        return True

    for _, arrived in schedule:
        for s in engine.on_receive(arrived):
            t0 = time.perf_counter()
            engine.advance(s)
            k = s.process
            row = flags[k]
            row.append(bool(s.payload[names[k]]))
            win = engine.windows[k]
            if len(row) > len(win):
                del row[0]
            los[k] = win.min_index
            may_satisfy = all(any(row) for row in flags)
            may_violate = not all(all(row) for row in flags)
            view = engine.snapshot()
            def_mon.observe(view, satisfies, may_satisfy, may_violate)
            t_total += time.perf_counter() - t0
            pos_mon.observe(view, satisfies, may_satisfy, may_violate)
            stats.advances += 1
            stats.node_sum += len(view.nodes)
            stats.max_nodes = max(stats.max_nodes, len(view.nodes))
            if all(len(win) > 0 for win in engine.windows):
                t0s = min(intervals[(k, engine.windows[k].min_index)][0] for k in range(n))
                t1s = max(intervals[(k, engine.windows[k].max_index)][1] for k in range(n))
                truth = timeline.any_all_true(t0s, t1s)
                if truth and not phys_plain_prev:
                    stats.physical_transitions += 1
                phys_plain_prev = truth
                lo = max(t0s, phys_marker)
                if lo <= t1s:
                    if not phys_active:
                        if timeline.any_all_true(lo, t1s):
                            stats.physical_detections += 1
                            phys_active = True
                            phys_marker = t1s
                    elif timeline.any_not_all_true(lo, t1s):
                        phys_active = False
                        phys_marker = t1s
    stats.detections_def = def_mon.count
    stats.detections_pos = pos_mon.count
    stats.transitions_def = def_mon.plain_count
    stats.transitions_pos = pos_mon.plain_count
    stats.max_grow_candidates = engine.stats.max_grow_candidates
    stats.max_pruned = engine.stats.max_pruned
    stats.t_advance_mean_us = (t_total / stats.advances * 1e6) if stats.advances else 0.0
    return stats


@dataclass
class BaselineStats:
    advances: int = 0
    node_sum: int = 0
    final_size: int = 0
    detections_def: int = 0
    detections_pos: int = 0
    truncated: bool = False
    budget: int | None = None

    @property
    def s_lat_mean(self) -> float:
        return self.node_sum / self.advances if self.advances else 0.0


def run_baseline(
    trace: Trace, schedule: Sequence[tuple[float, object]], node_budget: int | None
) -> BaselineStats:
    """Replay through the unbounded engine (the full-lattice baseline).

    On budget exhaustion the run stops and falls back to vectorised size
    counting when the grid permits; detection counts are then unavailable.
    """
    n = trace.n
    engine = LatWinEngine(n, None, store_edges=False, node_budget=node_budget)
    def_mon = BaselineMonitor(engine, Property.conjunction(n, modality=Modality.DEFINITELY))
    pos_mon = BaselineMonitor(engine, Property.conjunction(n, modality=Modality.POSSIBLY))
    stats = BaselineStats(budget=node_budget)
    try:
        for _, arrived in schedule:
            for s in engine.on_receive(arrived):
                report = engine.advance(s)
                def_mon.observe(report.added)
                pos_mon.observe(report.added)
                stats.advances += 1
                stats.node_sum += report.node_count
        stats.final_size = len(engine.nodes)
        stats.detections_def = def_mon.count
        stats.detections_pos = pos_mon.count
    except NodeBudgetExceeded:
        stats.truncated = True
        try:
            sizes = baseline_size_series(trace, schedule)
            stats.advances = len(sizes)
            stats.node_sum = int(sizes.sum())
            stats.final_size = int(sizes[-1]) if len(sizes) else 0
        except Exception:
            # Grid too large even to count: degrade to the budget bound.
            stats.advances = len(schedule)
            stats.node_sum = (node_budget or 0) * len(schedule)
            stats.final_size = node_budget or 0
    return stats


def baseline_size_series(
    trace: Trace, schedule: Sequence[tuple[float, object]]
) -> np.ndarray:
    """Full-lattice size after each advance, by vectorised counting.

    Independent of the engine: for every delivered state, counts consistent
    combinations containing it among already-delivered peer prefixes.
    """
    n = trace.n
    streams = trace.streams()
    mats: dict[tuple[int, int], np.ndarray] = {}
    for p in range(n):
        for q in range(p + 1, n):
            mats[(p, q)] = concurrency_matrix(streams[p], streams[q])
    queues = [ReorderQueue(k) for k in range(n)]
    delivered = [0] * n
    sizes: list[int] = []
    total = 0
    letters = "abcdefgh"
    for _, arrived in schedule:
        for s in queues[arrived.process].offer(arrived):
            k = s.process
            delivered[k] = s.index + 1
            peers = [j for j in range(n) if j != k]
            if n == 1:
                total += 1
            elif all(delivered[j] > 0 for j in peers):
                ops = []
                subs = []
                for pos, j in enumerate(peers):
                    lohi = (min(k, j), max(k, j))
                    mat = mats[lohi]
                    row = mat[s.index, : delivered[j]] if k < j else mat[: delivered[j], s.index]
                    ops.append(row.astype(np.int64))
                    subs.append(letters[pos])
                for a in range(len(peers)):
                    for b in range(a + 1, len(peers)):
                        ja, jb = peers[a], peers[b]
                        mat = mats[(min(ja, jb), max(ja, jb))]
                        block = mat[: delivered[ja], : delivered[jb]]
                        if ja > jb:
                            block = block.T
                        ops.append(block.astype(np.int64))
                        subs.append(letters[a] + letters[b])
                total += int(np.einsum(",".join(subs) + "->", *ops, optimize=True))
            sizes.append(total)
    return np.array(sizes, dtype=np.int64)


# -- metric aggregation -------------------------------------------------------


@dataclass
class MetricsReport:
    """Averaged metrics for one sweep point."""

    sweep: str
    param: float
    seed_count: int
    perc_det: float | None = None
    perc_det_std: float | None = None
    perc_s: float | None = None
    perc_s_std: float | None = None
    prob_det: float | None = None
    prob_det_std: float | None = None
    s_latwin: float | None = None
    s_latwin_std: float | None = None
    t_latwin_us: float | None = None
    theta_fit: float | None = None
    baseline_truncated: bool = False
    detail: dict = field(default_factory=dict)

    def csv_row(self, timings: bool) -> str:
        def fmt(x: float | None) -> str:
            if x is None:
                return ""
            if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
                return ""
            return format(x, ".6g")

        cells = [
            self.sweep,
            fmt(self.param),
            str(self.seed_count),
            fmt(self.perc_det),
            fmt(self.perc_s),
            fmt(self.prob_det),
            fmt(self.s_latwin),
            fmt(self.t_latwin_us) if timings else "",
            fmt(self.theta_fit),
        ]
        return ",".join(cells)

    def to_json_dict(self) -> dict:
        out = {
            "sweep": self.sweep,
            "param": self.param,
            "seed_count": self.seed_count,
            "perc_det": self.perc_det,
            "perc_det_std": self.perc_det_std,
            "perc_s": self.perc_s,
            "perc_s_std": self.perc_s_std,
            "prob_det": self.prob_det,
            "prob_det_std": self.prob_det_std,
            "s_latwin": self.s_latwin,
            "s_latwin_std": self.s_latwin_std,
            "t_latwin_us": self.t_latwin_us,
            "theta_fit": self.theta_fit,
            "baseline_truncated": self.baseline_truncated,
        }
        out.update(self.detail)
        return out


def _mean_std(values: Sequence[float]) -> tuple[float | None, float | None]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    arr = np.array(vals, dtype=float)
    return float(arr.mean()), float(arr.std())


def _count_ratio(num: int, den: int) -> float | None:
    """num/den with both-zero treated as a perfect match and a bare zero
    denominator as undefined (excluded from averages)."""
    if den == 0:
        return 1.0 if num == 0 else None
    return num / den


def seed_list(cfg: SimConfig, seeds: int) -> list[int]:
    return [cfg.seed + i for i in range(seeds)]


# -- sweep tasks (module level for pickling) ---------------------------------


def _benefit_seed_task(args: tuple[SimConfig, int, tuple[int, ...], int | None]) -> dict:
    cfg, seed, w_values, budget = args
    scfg = cfg.with_seed(seed)
    trace = generate(scfg)
    schedule = deliver(trace, scfg)
    base = run_baseline(trace, schedule, budget)
    events = trace.events_per_process()
    out: dict = {
        "seed": seed,
        "truncated": base.truncated,
        "n_lat_def": base.detections_def,
        "n_lat_pos": base.detections_pos,
        "s_lat_sum": base.node_sum,
        "s_lat_final": base.final_size,
        "events_per_process": events,
        "per_w": {},
    }
    for w in w_values:
        ws = run_windowed(trace, schedule, w)
        out["per_w"][w] = {
            "n_win_def": ws.detections_def,
            "n_win_pos": ws.detections_pos,
            "transitions_def": ws.transitions_def,
            "n_phys": ws.physical_detections,
            "node_sum": ws.node_sum,
            "advances": ws.advances,
            "max_nodes": ws.max_nodes,
            "max_grow": ws.max_grow_candidates,
            "max_pruned": ws.max_pruned,
            "t_us": ws.t_advance_mean_us,
        }
    return out


def _point_seed_task(args: tuple[SimConfig, int, int | None]) -> dict:
    cfg, seed, w = args
    scfg = cfg.with_seed(seed)
    trace = generate(scfg)
    schedule = deliver(trace, scfg)
    ws = run_windowed(trace, schedule, w if w is not None else scfg.w)
    return {
        "seed": seed,
        "n_win_def": ws.detections_def,
        "n_win_pos": ws.detections_pos,
        "transitions_def": ws.transitions_def,
        "n_phys": ws.physical_detections,
        "s_latwin": ws.s_latwin,
        "max_nodes": ws.max_nodes,
        "max_grow": ws.max_grow_candidates,
        "max_pruned": ws.max_pruned,
        "advances": ws.advances,
        "t_us": ws.t_advance_mean_us,
    }


def _map_tasks(fn: Callable, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _window_point_report(sweep: str, param: float, results: list[dict]) -> MetricsReport:
    prob_vals = [_count_ratio(r["n_phys"], r["n_win_def"]) for r in results]
    prob_mean, prob_std = _mean_std(prob_vals)
    s_mean, s_std = _mean_std([r["s_latwin"] for r in results])
    t_mean, _ = _mean_std([r["t_us"] for r in results])
    return MetricsReport(
        sweep=sweep,
        param=param,
        seed_count=len(results),
        prob_det=prob_mean,
        prob_det_std=prob_std,
        s_latwin=s_mean,
        s_latwin_std=s_std,
        t_latwin_us=t_mean,
        detail={"per_seed": results},
    )


def run_benefit_sweep(
    cfg: SimConfig,
    w_values: Sequence[int],
    *,
    seeds: int = 10,
    lat_budget: int | None = 500_000,
    workers: int = 1,
) -> list[MetricsReport]:
    """Replay identical traces through every window size and the unbounded
    baseline; emit detection and space ratios per window size."""
    if not w_values:
        raise ValueError("w_values must be non-empty")
    tasks = [(cfg, s, tuple(w_values), lat_budget) for s in seed_list(cfg, seeds)]
    per_seed = _map_tasks(_benefit_seed_task, tasks, workers)
    rows: list[MetricsReport] = []
    for w in w_values:
        perc_det_vals: list[float | None] = []
        perc_s_vals: list[float | None] = []
        prob_vals: list[float | None] = []
        s_vals: list[float] = []
        t_vals: list[float] = []
        truncated = False
        for seed_res in per_seed:
            wres = seed_res["per_w"][w]
            if seed_res["truncated"]:
                truncated = True
                perc_det_vals.append(None)
            else:
                perc_det_vals.append(_count_ratio(wres["n_win_def"], seed_res["n_lat_def"]))
            denom = seed_res["s_lat_sum"]
            perc_s_vals.append(wres["node_sum"] / denom if denom else None)
            prob_vals.append(_count_ratio(wres["n_phys"], wres["n_win_def"]))
            s_vals.append(wres["node_sum"] / wres["advances"] if wres["advances"] else 0.0)
            t_vals.append(wres["t_us"])
        pd_mean, pd_std = _mean_std(perc_det_vals)
        ps_mean, ps_std = _mean_std(perc_s_vals)
        prob_mean, prob_std = _mean_std(prob_vals)
        s_mean, s_std = _mean_std(s_vals)
        t_mean, _ = _mean_std(t_vals)
        rows.append(
            MetricsReport(
                sweep="benefit",
                param=float(w),
                seed_count=len(per_seed),
                perc_det=pd_mean,
                perc_det_std=pd_std,
                perc_s=ps_mean,
                perc_s_std=ps_std,
                prob_det=prob_mean,
                prob_det_std=prob_std,
                s_latwin=s_mean,
                s_latwin_std=s_std,
                t_latwin_us=t_mean,
                baseline_truncated=truncated,
                detail={
                    "per_seed": [
                        {
                            "seed": sr["seed"],
                            "events_per_process": sr["events_per_process"],
                            "n_lat_def": sr["n_lat_def"],
                            "n_lat_pos": sr["n_lat_pos"],
                            "s_lat_final": sr["s_lat_final"],
                            **sr["per_w"][w],
                        }
                        for sr in per_seed
                    ]
                },
            )
        )
    return rows


def run_delay_sweep(
    cfg: SimConfig,
    delays: Sequence[float],
    *,
    seeds: int = 10,
    workers: int = 1,
) -> list[MetricsReport]:
    rows = []
    for delay in delays:
        dcfg = replace(cfg, mean_delay=float(delay))
        tasks = [(dcfg, s, None) for s in seed_list(cfg, seeds)]
        results = _map_tasks(_point_seed_task, tasks, workers)
        rows.append(_window_point_report("delay", float(delay), results))
    return rows


def run_window_sweep(
    cfg: SimConfig,
    w_values: Sequence[int],
    *,
    seeds: int = 10,
    workers: int = 1,
) -> list[MetricsReport]:
    rows = []
    for w in w_values:
        tasks = [(cfg, s, int(w)) for s in seed_list(cfg, seeds)]
        results = _map_tasks(_point_seed_task, tasks, workers)
        rows.append(_window_point_report("window", float(w), results))
    return rows


def run_n_sweep(
    cfg: SimConfig,
    n_values: Sequence[int],
    *,
    seeds: int = 10,
    workers: int = 1,
) -> list[MetricsReport]:
    rows = []
    for n in n_values:
        ncfg = replace(cfg, n=int(n))
        tasks = [(ncfg, s, None) for s in seed_list(cfg, seeds)]
        results = _map_tasks(_point_seed_task, tasks, workers)
        report = _window_point_report("nprocs", float(n), results)
        rows.append(report)
    theta = fit_theta([r.param for r in rows], [r.s_latwin for r in rows], cfg.w)
    for r in rows:
        r.theta_fit = theta
    return rows


def fit_theta(n_values: Sequence[float], s_means: Sequence[float | None], w: int) -> float | None:
    """Exponent base from fitting mean size ~ (theta*w)^n across n."""
    xs = [n for n, s in zip(n_values, s_means) if s and s > 0]
    ys = [math.log(s) for s in s_means if s and s > 0]
    if len(xs) < 2:
        return None
    slope = float(np.polyfit(np.array(xs), np.array(ys), 1)[0])
    return math.exp(slope) / w


def isotonic_fit(values: Sequence[float], *, increasing: bool = True) -> list[float]:
    """Least-squares monotone fit by pool-adjacent-violators."""
    ys = list(values) if increasing else [-v for v in values]
    blocks: list[tuple[float, int]] = []
    for y in ys:
        total, count = y, 1
        while blocks and blocks[-1][0] / blocks[-1][1] > total / count:
            pt, pc = blocks.pop()
            total += pt
            count += pc
        blocks.append((total, count))
    fit: list[float] = []
    for total, count in blocks:
        fit.extend([total / count] * count)
    return fit if increasing else [-v for v in fit]


def emit(
    rows: Sequence[MetricsReport],
    out_dir: str,
    name: str,
    *,
    timings: bool = False,
) -> tuple[str, str]:
    """Write ``<name>.csv`` (deterministic) and ``<name>_summary.json``.

    Timing columns vary run to run, so the CSV leaves them empty unless
    ``timings`` is set; the JSON summary always carries them.
    """
    os.makedirs(out_dir, exist_ok=True)
    ordered = sorted(rows, key=lambda r: (r.sweep, r.param))
    csv_path = os.path.join(out_dir, f"{name}.csv")
    with open(csv_path, "w") as fp:
        fp.write(CSV_HEADER + "\n")
        for row in ordered:
            fp.write(row.csv_row(timings) + "\n")
    json_path = os.path.join(out_dir, f"{name}_summary.json")
    with open(json_path, "w") as fp:
        json.dump(
            {
                "name": name,
                "rows": [r.to_json_dict() for r in ordered],
                "reference_values": REFERENCE_VALUES,
            },
            fp,
            indent=2,
            sort_keys=True,
        )
        fp.write("\n")
    return csv_path, json_path
