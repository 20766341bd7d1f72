"""Recorded runs: events, messages, timed states, and replay serialisation.

A trace is the ground-truth record of one run: every event with its clock
and physical time, the delivered message pairs, and each local state with
the physical interval it spans.  Engines never see physical time; it exists
for detection-accuracy accounting only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .clocks import EventId, LocalState, RECEIVE, VectorClock
from .engine import state_to_record


@dataclass(frozen=True, slots=True)
class Event:
    eid: EventId
    clock: VectorClock
    time: float


@dataclass(frozen=True, slots=True)
class Message:
    send: EventId
    receive: EventId
    delay: float


@dataclass(frozen=True, slots=True)
class TimedState:
    state: LocalState
    begin: float
    end: float


@dataclass
class Trace:
    """One complete run over ``n`` processes.

    ``events`` and ``timed_states`` are in global emission (time) order.
    ``schema`` lists the payload predicate names shared by every state.
    """

    n: int
    events: list[Event] = field(default_factory=list)
    messages: list[Message] = field(default_factory=list)
    timed_states: list[TimedState] = field(default_factory=list)
    schema: tuple[str, ...] = ()

    def streams(self) -> list[list[LocalState]]:
        """Per-process state lists ordered by index."""
        out: list[list[LocalState]] = [[] for _ in range(self.n)]
        for ts in self.timed_states:
            out[ts.state.process].append(ts.state)
        for stream in out:
            stream.sort(key=lambda s: s.index)
        return out

    def timed_streams(self) -> list[list[TimedState]]:
        out: list[list[TimedState]] = [[] for _ in range(self.n)]
        for ts in self.timed_states:
            out[ts.state.process].append(ts)
        for stream in out:
            stream.sort(key=lambda t: t.state.index)
        return out

    def intervals(self) -> dict[tuple[int, int], tuple[float, float]]:
        """(process, index) -> (begin, end) lookup for window span queries."""
        return {
            (ts.state.process, ts.state.index): (ts.begin, ts.end)
            for ts in self.timed_states
        }

    def events_per_process(self) -> list[int]:
        counts = [0] * self.n
        for ev in self.events:
            counts[ev.eid.process] += 1
        return counts


def recompute_clocks(trace: Trace) -> dict[EventId, VectorClock]:
    """Replay the event DAG and rebuild every clock from scratch.

    Independent of the stored clocks; used to validate that recorded clocks
    encode exactly the program order plus delivered message edges.
    """
    n = trace.n
    send_clock: dict[EventId, VectorClock] = {}
    source_of = {m.receive: m.send for m in trace.messages}
    current = [[0] * n for _ in range(n)]
    out: dict[EventId, VectorClock] = {}
    for ev in sorted(trace.events, key=lambda e: (e.time, e.eid.kind == RECEIVE, e.eid.process, e.eid.index)):
        row = current[ev.eid.process]
        row[ev.eid.process] += 1
        if ev.eid.kind == RECEIVE and ev.eid in source_of:
            sender = send_clock[source_of[ev.eid]]
            for k in range(n):
                if sender[k] > row[k]:
                    row[k] = sender[k]
        clock = VectorClock(tuple(row))
        out[ev.eid] = clock
        if ev.eid.kind == "send":
            send_clock[ev.eid] = clock
    return out


# -- delivery schedules and the JSON-lines replay format --------------------


def write_delivery_jsonl(
    schedule: Iterable[tuple[float, LocalState]],
    fp: TextIO,
    intervals: dict[tuple[int, int], tuple[float, float]] | None = None,
) -> int:
    """Write delivered states in arrival order, one JSON record per line."""
    count = 0
    for _, state in schedule:
        begin = None
        if intervals is not None:
            begin = intervals.get((state.process, state.index), (math.nan, math.nan))[0]
        fp.write(json.dumps(state_to_record(state, true_time_begin=begin), sort_keys=True))
        fp.write("\n")
        count += 1
    return count
