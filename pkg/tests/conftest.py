"""Shared fixtures: a hand-built two-stream run with three cross messages.

The scenario pins an exact causal structure:

* P0 receives from P1 early (so every P0 state from index 1 on is causally
  after P1's first three states), receives again just before its state 4,
  and finally sends to P1 (message received by P1's event 5);
* the message placement makes (1,3) consistent, (4,3) inconsistent, and
  leaves the (3..5, 3..4) region concurrent.

Replaying the arrival order below at window size 3 exercises the full
lifecycle: startup growth, a prune-to-empty, regrowth from an empty window,
a refused growth with a one-node prune, a three-node growth, and a slide
that both grows and prunes.
"""

from dataclasses import dataclass

import pytest

from latwin.clocks import EventId, INTERNAL, LocalState, RECEIVE, SEND, VectorClock
from latwin.trace import Event, Message, TimedState, Trace

# (kind, time, clock) per event, in stream order; messages wire the clocks.
_P0_EVENTS = [
    (INTERNAL, 0.5, (1, 0)),
    (RECEIVE, 3.5, (2, 4)),   # from P1 event 3
    (INTERNAL, 4.2, (3, 4)),
    (INTERNAL, 4.6, (4, 4)),
    (RECEIVE, 5.0, (5, 5)),   # from P1 event 4
    (SEND, 6.0, (6, 5)),      # to P1 event 5
]
_P1_EVENTS = [
    (INTERNAL, 0.0, (0, 1)),
    (INTERNAL, 1.0, (0, 2)),
    (INTERNAL, 2.0, (0, 3)),
    (SEND, 3.0, (0, 4)),
    (SEND, 4.0, (0, 5)),
    (RECEIVE, 7.0, (6, 6)),
]
_MESSAGES = [
    (EventId(1, 3, SEND), EventId(0, 1, RECEIVE)),
    (EventId(1, 4, SEND), EventId(0, 4, RECEIVE)),
    (EventId(0, 5, SEND), EventId(1, 5, RECEIVE)),
]

ARRIVAL_ORDER = [
    (0, 0), (0, 1), (0, 2),
    (1, 0), (1, 1), (1, 2),
    (0, 3), (1, 3), (0, 4), (1, 4), (0, 5),
]

FULL_LATTICE_VECS = {
    (0, 0), (0, 1), (0, 2), (0, 3), (0, 4),
    (1, 3), (1, 4),
    (2, 3), (2, 4),
    (3, 3), (3, 4),
    (4, 4),
    (5, 4),
    (5, 5),
}


@dataclass
class Scenario:
    trace: Trace
    states: dict[tuple[int, int], LocalState]
    arrival_order: list[tuple[int, int]]
    full_lattice_vecs: set[tuple[int, int]]

    def state(self, process: int, index: int) -> LocalState:
        return self.states[(process, index)]

    def arriving_states(self) -> list[LocalState]:
        return [self.states[key] for key in self.arrival_order]


def build_two_stream_scenario(active: bool = True) -> Scenario:
    events: list[Event] = []
    states: dict[tuple[int, int], LocalState] = {}
    timed: list[TimedState] = []
    horizon = 8.0
    for proc, rows in ((0, _P0_EVENTS), (1, _P1_EVENTS)):
        for idx, (kind, t, clock) in enumerate(rows):
            eid = EventId(proc, idx, kind)
            vc = VectorClock(clock)
            events.append(Event(eid=eid, clock=vc, time=t))
            state = LocalState(
                process=proc, index=idx, clock=vc, seq=idx, payload={"active": active}
            )
            states[(proc, idx)] = state
            end = rows[idx + 1][1] if idx + 1 < len(rows) else horizon
            timed.append(TimedState(state=state, begin=t, end=end))
    events.sort(key=lambda e: e.time)
    timed.sort(key=lambda ts: ts.begin)
    times = {e.eid: e.time for e in events}
    messages = [
        Message(send=s, receive=r, delay=times[r] - times[s]) for s, r in _MESSAGES
    ]
    trace = Trace(n=2, events=events, messages=messages, timed_states=timed, schema=("active",))
    return Scenario(
        trace=trace,
        states=states,
        arrival_order=list(ARRIVAL_ORDER),
        full_lattice_vecs=set(FULL_LATTICE_VECS),
    )


@pytest.fixture(scope="session")
def two_stream() -> Scenario:
    return build_two_stream_scenario()
