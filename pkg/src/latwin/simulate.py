"""Seeded discrete-event simulation of asynchronous context streams.

Each monitored process alternates active/idle phases with exponentially
distributed durations, samples its context periodically, and occasionally
messages a random peer; every event begins a new local state whose payload
records whether the phase is active.  Delivery to the checker adds an
exponential delay per state, so per-process FIFO order can be violated in
arrival order (the reorder queues put it back).  Everything is a pure
function of the configuration, seed included.
"""

from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .clocks import EventId, INTERNAL, LocalState, RECEIVE, SEND, VectorClock
from .detection import Property
from .trace import Event, Message, TimedState, Trace

_DURATION_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*(ms|s|m|min|mins|h|hr|hrs)?\s*$")
_UNIT_SECONDS = {
    None: 1.0,
    "ms": 1e-3,
    "s": 1.0,
    "m": 60.0,
    "min": 60.0,
    "mins": 60.0,
    "h": 3600.0,
    "hr": 3600.0,
    "hrs": 3600.0,
}


def parse_duration(value: float | int | str) -> float:
    """Seconds from a number or a string like ``"25min"``, ``"0.5s"``, ``"2h"``."""
    if isinstance(value, (int, float)):
        return float(value)
    m = _DURATION_RE.match(value)
    if not m:
        raise ValueError(f"cannot parse duration {value!r}")
    return float(m.group(1)) * _UNIT_SECONDS[m.group(2)]


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters; durations are seconds.

    ``peer_msg_rate`` is messages per process-hour between peers (0 keeps
    all cross-process states concurrent).  ``lifetime`` defaults to the
    desk-scale two hours; longer runs are a flag away.
    """

    n: int = 3
    seed: int = 0
    mean_activity: float = 25 * 60.0
    mean_gap: float = 5 * 60.0
    sample_period: float = 60.0
    mean_delay: float = 0.5
    lifetime: float = 2 * 3600.0
    peer_msg_rate: float = 6.0
    w: int = 4

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("need at least one process")
        for name in ("mean_activity", "mean_gap", "sample_period", "lifetime"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.mean_delay < 0 or self.peer_msg_rate < 0:
            raise ValueError("mean_delay and peer_msg_rate cannot be negative")
        if self.w < 1:
            raise ValueError("window size must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        fields = dict(data)
        for name in ("mean_activity", "mean_gap", "sample_period", "mean_delay", "lifetime"):
            if name in fields:
                fields[name] = parse_duration(fields[name])
        return cls(**fields)

    @classmethod
    def from_json_file(cls, path: str) -> "SimConfig":
        with open(path) as fp:
            return cls.from_dict(json.load(fp))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "mean_activity": self.mean_activity,
            "mean_gap": self.mean_gap,
            "sample_period": self.sample_period,
            "mean_delay": self.mean_delay,
            "lifetime": self.lifetime,
            "peer_msg_rate": self.peer_msg_rate,
            "w": self.w,
        }

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=seed)


# Event kinds get a fixed rank so simultaneous timestamps order
# deterministically, with a send always ahead of its zero-delay receive.
_RANK = {"boundary": 0, "tick": 1, SEND: 2, RECEIVE: 3}


def _phase_track(rng: np.random.Generator, cfg: SimConfig) -> tuple[list[float], bool]:
    """Phase change times in (0, lifetime) and whether t=0 starts active."""
    active = bool(rng.random() < 0.5)
    bounds: list[float] = []
    t = 0.0
    state = active
    while True:
        mean = cfg.mean_activity if state else cfg.mean_gap
        t += float(rng.exponential(mean))
        if t >= cfg.lifetime:
            break
        bounds.append(t)
        state = not state
    return bounds, active


def _active_at(bounds: Sequence[float], start_active: bool, t: float) -> bool:
    flips = bisect.bisect_right(bounds, t)
    return start_active if flips % 2 == 0 else not start_active


def generate(cfg: SimConfig) -> Trace:
    """Produce one complete run, deterministic in ``cfg.seed``."""
    rng = np.random.default_rng([cfg.seed, 0])
    n = cfg.n

    phase_bounds: list[list[float]] = []
    phase_start: list[bool] = []
    for _ in range(n):
        bounds, start = _phase_track(rng, cfg)
        phase_bounds.append(bounds)
        phase_start.append(start)

    # Raw per-process occurrences: (time, rank, payload-for-kind).
    happenings: list[list[tuple[float, int, str, int]]] = [[] for _ in range(n)]
    for k in range(n):
        for t in phase_bounds[k]:
            happenings[k].append((t, _RANK["boundary"], INTERNAL, -1))
        ticks = np.arange(cfg.sample_period, cfg.lifetime, cfg.sample_period)
        for t in ticks:
            happenings[k].append((float(t), _RANK["tick"], INTERNAL, -1))

    sends: list[tuple[float, int, int]] = []  # (time, src, dst)
    if cfg.peer_msg_rate > 0 and n > 1:
        mean_gap_s = 3600.0 / cfg.peer_msg_rate
        for k in range(n):
            t = 0.0
            while True:
                t += float(rng.exponential(mean_gap_s))
                if t >= cfg.lifetime:
                    break
                dst = int(rng.integers(n - 1))
                if dst >= k:
                    dst += 1
                sends.append((t, k, dst))
    sends.sort()
    msg_delays = rng.exponential(cfg.mean_delay, size=len(sends)) if sends else np.zeros(0)

    receives: list[tuple[float, int, int]] = []  # (time, dst, msg_id)
    for msg_id, (t, src, _dst) in enumerate(sends):
        happenings[src].append((t, _RANK[SEND], SEND, msg_id))
        rt = t + float(msg_delays[msg_id])
        if rt < cfg.lifetime:
            receives.append((rt, sends[msg_id][2], msg_id))
    for rt, dst, msg_id in receives:
        happenings[dst].append((rt, _RANK[RECEIVE], RECEIVE, msg_id))

    # Global processing order: the initial event of every process at t=0,
    # then everything by (time, rank, process).
    timeline: list[tuple[float, int, int, str, int]] = []
    for k in range(n):
        for t, rank, kind, msg_id in happenings[k]:
            timeline.append((t, rank, k, kind, msg_id))
    timeline.sort()

    clocks = [[0] * n for _ in range(n)]
    next_index = [0] * n
    send_clock_by_msg: dict[int, VectorClock] = {}
    send_eid_by_msg: dict[int, EventId] = {}
    events: list[Event] = []
    messages: list[Message] = []
    raw_states: list[tuple[LocalState, float]] = []

    def emit(k: int, t: float, kind: str, msg_id: int) -> None:
        idx = next_index[k]
        next_index[k] += 1
        row = clocks[k]
        row[k] += 1
        if kind == RECEIVE:
            sender = send_clock_by_msg[msg_id]
            for j in range(n):
                if sender[j] > row[j]:
                    row[j] = sender[j]
        clock = VectorClock(tuple(row))
        eid = EventId(process=k, index=idx, kind=kind)
        events.append(Event(eid=eid, clock=clock, time=t))
        if kind == SEND:
            send_clock_by_msg[msg_id] = clock
            send_eid_by_msg[msg_id] = eid
        elif kind == RECEIVE:
            messages.append(
                Message(send=send_eid_by_msg[msg_id], receive=eid, delay=t - sends[msg_id][0])
            )
        payload = {"active": _active_at(phase_bounds[k], phase_start[k], t)}
        raw_states.append(
            (LocalState(process=k, index=idx, clock=clock, seq=idx, payload=payload), t)
        )

    for k in range(n):
        emit(k, 0.0, INTERNAL, -1)
    for t, _rank, k, kind, msg_id in timeline:
        emit(k, t, kind, msg_id)

    ends: dict[tuple[int, int], float] = {}
    for state, begin in raw_states:
        key = (state.process, state.index - 1)
        if state.index > 0:
            ends[key] = begin
    timed = [
        TimedState(
            state=state,
            begin=begin,
            end=ends.get((state.process, state.index), cfg.lifetime),
        )
        for state, begin in raw_states
    ]
    return Trace(n=n, events=events, messages=messages, timed_states=timed, schema=("active",))


def deliver(trace: Trace, cfg: SimConfig) -> list[tuple[float, LocalState]]:
    """Arrival schedule at the checker: per-state exponential delay, sorted
    by arrival time with emission order as the tie-break."""
    rng = np.random.default_rng([cfg.seed, 1])
    delays = (
        rng.exponential(cfg.mean_delay, size=len(trace.timed_states))
        if cfg.mean_delay > 0
        else np.zeros(len(trace.timed_states))
    )
    keyed = [
        (ts.begin + float(delays[i]), i, ts.state)
        for i, ts in enumerate(trace.timed_states)
    ]
    keyed.sort(key=lambda item: (item[0], item[1]))
    return [(arrival, state) for arrival, _, state in keyed]


class ActivityTimeline:
    """Per-process step functions of predicate truth over physical time."""

    def __init__(self, begins: list[np.ndarray], values: list[np.ndarray], horizon: float):
        self._begins = begins
        self._values = values
        self.horizon = horizon

    @classmethod
    def build(cls, trace: Trace, names: Sequence[str]) -> "ActivityTimeline":
        begins: list[np.ndarray] = []
        values: list[np.ndarray] = []
        horizon = 0.0
        for k, stream in enumerate(trace.timed_streams()):
            begins.append(np.array([ts.begin for ts in stream]))
            values.append(np.array([bool(ts.state.payload[names[k]]) for ts in stream]))
            if stream:
                horizon = max(horizon, stream[-1].end)
        return cls(begins, values, horizon)

    def _value_at(self, k: int, t: float) -> bool:
        pos = int(np.searchsorted(self._begins[k], t, side="right")) - 1
        if pos < 0:
            return False
        return bool(self._values[k][pos])

    def _cuts(self, t0: float, t1: float) -> set[float]:
        cuts = {t0, t1}
        for k in range(len(self._begins)):
            lo = int(np.searchsorted(self._begins[k], t0, side="right"))
            hi = int(np.searchsorted(self._begins[k], t1, side="right"))
            cuts.update(float(t) for t in self._begins[k][lo:hi])
        return cuts

    def any_all_true(self, t0: float, t1: float) -> bool:
        """True when some instant in [t0, t1] has every predicate true."""
        if t0 > t1:
            raise ValueError(f"bad span [{t0}, {t1}]")
        procs = range(len(self._begins))
        return any(
            all(self._value_at(k, t) for k in procs) for t in self._cuts(t0, t1)
        )

    def any_not_all_true(self, t0: float, t1: float) -> bool:
        """True when some instant in [t0, t1] has the conjunction false."""
        if t0 > t1:
            raise ValueError(f"bad span [{t0}, {t1}]")
        procs = range(len(self._begins))
        return any(
            not all(self._value_at(k, t) for k in procs) for t in self._cuts(t0, t1)
        )


def ground_truth(trace: Trace, prop: Property, window_span: tuple[float, float]) -> bool:
    """Did the conjunction physically hold at some instant of the span?

    The span is the physical interval covered by the states currently in the
    n-dimensional window (earliest begin to latest end across processes).
    """
    timeline = ActivityTimeline.build(trace, prop.locals)
    return timeline.any_all_true(window_span[0], window_span[1])
