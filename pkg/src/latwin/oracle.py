"""Randomized equivalence suite: engine vs. brute-force reconstruction.

Everything here is deliberately independent of the engine's incremental
logic: consistency sets come from exhaustive product enumeration, causality
from transitive closure over the recorded event DAG, and Definitely verdicts
from maximal-chain counting.  The suite replays random traces through two
engines (grow-then-prune and prune-then-grow) and checks, after every single
advance, that the maintained lattice equals the full lattice filtered to the
current window, along with the lattice laws, anchor placement, cost bounds,
and detection semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .clocks import EventId, INTERNAL, LocalState, RECEIVE, SEND, VectorClock
from .detection import Modality, Property, detect
from .engine import LatWinEngine, LatWinView
from .lattice import Vec, enumerate_consistent_vecs
from .trace import Event, Message, TimedState, Trace


def random_trace(
    rng: np.random.Generator,
    n: int = 2,
    max_events: int = 20,
    p_send: float = 0.2,
    p_recv: float = 0.5,
    p_flip: float = 0.3,
) -> Trace:
    """A random run with arbitrary interleavings and message causality.

    Stress-oriented rather than physically plausible: heavy messaging, random
    payload flips, synthetic unit-step time.
    """
    budgets = [int(rng.integers(3, max_events + 1)) for _ in range(n)]
    clocks = [[0] * n for _ in range(n)]
    next_idx = [0] * n
    active = [bool(rng.random() < 0.5) for _ in range(n)]
    inflight: list[list[tuple[EventId, VectorClock]]] = [[] for _ in range(n)]
    events: list[Event] = []
    messages: list[Message] = []
    raw: list[tuple[LocalState, float]] = []
    t = 0.0

    def emit(k: int, kind: str, origin: tuple[EventId, VectorClock] | None = None) -> Event:
        nonlocal t
        idx = next_idx[k]
        next_idx[k] += 1
        row = clocks[k]
        row[k] += 1
        if origin is not None:
            for j in range(n):
                if origin[1][j] > row[j]:
                    row[j] = origin[1][j]
        clock = VectorClock(tuple(row))
        ev = Event(eid=EventId(process=k, index=idx, kind=kind), clock=clock, time=t)
        events.append(ev)
        if rng.random() < p_flip:
            active[k] = not active[k]
        raw.append(
            (
                LocalState(process=k, index=idx, clock=clock, seq=idx, payload={"active": active[k]}),
                t,
            )
        )
        t += 1.0
        return ev

    for k in range(n):
        emit(k, INTERNAL)
    while True:
        open_procs = [k for k in range(n) if next_idx[k] < budgets[k]]
        if not open_procs:
            break
        k = int(open_procs[rng.integers(len(open_procs))])
        roll = rng.random()
        if inflight[k] and roll < p_recv:
            send_eid, send_clock = inflight[k].pop(0)
            ev = emit(k, RECEIVE, origin=(send_eid, send_clock))
            messages.append(Message(send=send_eid, receive=ev.eid, delay=ev.time))
        elif n > 1 and roll < p_recv + p_send:
            ev = emit(k, SEND)
            dst = int(rng.integers(n - 1))
            if dst >= k:
                dst += 1
            inflight[dst].append((ev.eid, ev.clock))
        else:
            emit(k, INTERNAL)

    ends: dict[tuple[int, int], float] = {}
    for state, begin in raw:
        if state.index > 0:
            ends[(state.process, state.index - 1)] = begin
    timed = [
        TimedState(state=s, begin=b, end=ends.get((s.process, s.index), t))
        for s, b in raw
    ]
    return Trace(n=n, events=events, messages=messages, timed_states=timed, schema=("active",))


class EventReachability:
    """Transitive closure of program order plus delivered message edges.

    The clock-free happen-before oracle: reachability over the explicit DAG.
    """

    def __init__(self, trace: Trace):
        order = sorted(
            range(len(trace.events)),
            key=lambda i: (trace.events[i].time, trace.events[i].eid.kind == RECEIVE),
        )
        self._pos = {trace.events[i].eid: rank for rank, i in enumerate(order)}
        events = [trace.events[i] for i in order]
        succs: list[list[int]] = [[] for _ in events]
        latest: dict[int, int] = {}
        for rank, ev in enumerate(events):
            prev = latest.get(ev.eid.process)
            if prev is not None:
                succs[prev].append(rank)
            latest[ev.eid.process] = rank
        for msg in trace.messages:
            succs[self._pos[msg.send]].append(self._pos[msg.receive])
        reach = [0] * len(events)
        for rank in range(len(events) - 1, -1, -1):
            mask = 1 << rank
            for nxt in succs[rank]:
                mask |= reach[nxt]
            reach[rank] = mask
        self._reach = reach
        self._ends = {}
        for ev in events:
            self._ends[(ev.eid.process, ev.eid.index - 1)] = ev.eid

    def event_hb(self, a: EventId, b: EventId) -> bool:
        if a == b:
            return False
        return bool((self._reach[self._pos[a]] >> self._pos[b]) & 1)

    def state_hb(self, s1: LocalState, s2: LocalState) -> bool:
        if s1.process == s2.process:
            return s1.index < s2.index
        ending = self._ends.get((s1.process, s1.index))
        if ending is None:
            return False
        begin = self._ends.get((s2.process, s2.index - 1))
        if begin is None:
            # s2 begins the stream; nothing can precede its beginning event.
            return False
        return self.event_hb(ending, begin) or ending == begin


# -- chain-based Definitely oracle ------------------------------------------


def count_avoiding_chains(view: LatWinView, satisfies: Callable[[Vec], bool]) -> int:
    """Number of maximal min-to-max chains using no satisfying node.

    Dynamic program over the cover DAG in level order; exact big-int count,
    equivalent to enumerating every chain.
    """
    if view.is_empty:
        return 0
    counts: dict[Vec, int] = {}
    for vec in sorted(view.nodes, key=lambda v: (sum(v), v)):
        if satisfies(vec):
            counts[vec] = 0
            continue
        if vec == view.c_min:
            counts[vec] = 1
            continue
        counts[vec] = sum(counts.get(p, 0) for p in view.predecessors(vec))
    return counts.get(view.c_max, 0)


def dfs_avoiding_chains(view: LatWinView, satisfies: Callable[[Vec], bool]) -> int:
    """Literal chain enumeration; exponential, for small cross-checks only."""
    if view.is_empty:
        return 0

    def walk(vec: Vec) -> int:
        if satisfies(vec):
            return 0
        if vec == view.c_max:
            return 1
        return sum(walk(s) for s in view.successors(vec))

    return walk(view.c_min)


def definitely_by_chains(view: LatWinView, satisfies: Callable[[Vec], bool]) -> bool:
    return (not view.is_empty) and count_avoiding_chains(view, satisfies) == 0


# -- per-trace equivalence run ----------------------------------------------


@dataclass
class CheckResult:
    """Violation counters for one verification run (zero everywhere = pass)."""

    traces: int = 0
    advances: int = 0
    node_mismatches: int = 0
    edge_mismatches: int = 0
    anchor_violations: int = 0
    law_violations: int = 0
    convexity_violations: int = 0
    bound_violations: int = 0
    commute_divergences: int = 0
    definitely_mismatches: int = 0
    implication_violations: int = 0
    detection_checks: int = 0
    max_nodes_seen: int = 0

    def merge(self, other: "CheckResult") -> None:
        for f in fields(self):
            if f.name == "max_nodes_seen":
                self.max_nodes_seen = max(self.max_nodes_seen, other.max_nodes_seen)
            else:
                setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    @property
    def ok(self) -> bool:
        return (
            self.node_mismatches == self.edge_mismatches == self.anchor_violations
            == self.law_violations == self.convexity_violations == self.bound_violations
            == self.commute_divergences == self.definitely_mismatches
            == self.implication_violations == 0
        )

    def summary(self) -> str:
        flat = ", ".join(
            f"{f.name}={getattr(self, f.name)}"
            for f in fields(self)
            if f.name not in ("traces", "advances", "detection_checks", "max_nodes_seen")
        )
        return (
            f"traces={self.traces} advances={self.advances} "
            f"detection_checks={self.detection_checks} [{flat}]"
        )


def _stored_edges(engine: LatWinEngine) -> tuple[set[tuple[Vec, Vec]], bool]:
    """Edge pairs from stored adjacency, with a symmetry flag."""
    down: set[tuple[Vec, Vec]] = set()
    up: set[tuple[Vec, Vec]] = set()
    for node in engine.nodes.values():
        for succ in node.succs:
            down.add((node.vec, succ.vec))
        for pred in node.preds:
            up.add((pred.vec, node.vec))
    return down, down == up


def _derived_edges(vecs: set[Vec], n: int) -> set[tuple[Vec, Vec]]:
    out: set[tuple[Vec, Vec]] = set()
    for vec in vecs:
        for k in range(n):
            upv = vec[:k] + (vec[k] + 1,) + vec[k + 1 :]
            if upv in vecs:
                out.add((vec, upv))
    return out


def _laws_hold(arr: np.ndarray, codes: set[int], radix: np.ndarray, rng: np.random.Generator,
               triple_samples: int) -> bool:
    """Meet/join closure on all pairs, absorption + distributivity on samples."""
    m = arr.shape[0]
    if m <= 1:
        return True
    enc_cols = [arr[:, k].astype(np.int64) * int(radix[k]) for k in range(arr.shape[1])]
    min_code = np.zeros((m, m), dtype=np.int64)
    max_code = np.zeros((m, m), dtype=np.int64)
    for col in enc_cols:
        min_code += np.minimum.outer(col, col)
        max_code += np.maximum.outer(col, col)
    code_arr = np.fromiter(codes, dtype=np.int64, count=len(codes))
    if not np.isin(min_code, code_arr).all() or not np.isin(max_code, code_arr).all():
        return False
    picks = rng.integers(0, m, size=(triple_samples, 3))
    a, b, c = arr[picks[:, 0]], arr[picks[:, 1]], arr[picks[:, 2]]
    lhs = np.minimum(a, np.maximum(b, c))
    rhs = np.maximum(np.minimum(a, b), np.minimum(a, c))
    if not (lhs == rhs).all():
        return False
    if not (np.minimum(a, np.maximum(a, b)) == a).all():
        return False
    encode = lambda arr3: (arr3.astype(np.int64) * radix).sum(axis=1)  # noqa: E731
    for inter in (np.maximum(b, c), np.minimum(a, b), np.minimum(a, c), lhs):
        if not np.isin(encode(inter), code_arr).all():
            return False
    return True


def verify_trace(
    trace: Trace,
    w: int,
    rng: np.random.Generator,
    *,
    detection_node_limit: int = 200,
    deep_chain_limit: int = 40,
    triple_samples: int = 24,
) -> CheckResult:
    """Replay one trace at window size ``w`` and check every invariant after
    every advance.  Arrival order is a random shuffle of all states (the
    reorder queues restore per-process order)."""
    res = CheckResult(traces=1)
    n = trace.n
    streams = trace.streams()
    lat_arr = enumerate_consistent_vecs(streams)
    radix = np.ones(n, dtype=np.int64)
    span = max((len(s) for s in streams), default=0) + 2
    for k in range(n - 2, -1, -1):
        radix[k] = radix[k + 1] * span
    lat_codes = (lat_arr * radix).sum(axis=1) if len(lat_arr) else np.zeros(0, dtype=np.int64)

    # The second engine flips the grow/prune order AND derives neighbours
    # from membership instead of stored edges, so both variants are held to
    # the oracle on every advance.
    eng = LatWinEngine(n, w)
    eng2 = LatWinEngine(n, w, prune_first=True, store_edges=False)
    prop = Property.conjunction(n, modality=Modality.DEFINITELY)
    pos = Property.conjunction(n, modality=Modality.POSSIBLY)

    all_states = [ts.state for ts in trace.timed_states]
    order = rng.permutation(len(all_states))
    cap = w ** n
    cap_side = w ** (n - 1)

    for pos_i in order:
        arrived = all_states[int(pos_i)]
        deliverable = eng.on_receive(arrived)
        eng2.on_receive(arrived)
        for s in deliverable:
            r1 = eng.advance(s)
            eng2.advance(s)
            res.advances += 1
            snap = eng.snapshot()
            snap2 = eng2.snapshot()
            if (
                snap.nodes != snap2.nodes
                or snap.c_min != snap2.c_min
                or snap.c_max != snap2.c_max
            ):
                res.commute_divergences += 1
            if any(len(eng.windows[k]) == 0 for k in range(n)):
                want: set[Vec] = set()
                los = his = np.zeros(n, dtype=np.int64)
            else:
                los = np.array([eng.windows[k].min_index for k in range(n)])
                his = np.array([eng.windows[k].max_index for k in range(n)])
                in_win = ((lat_arr >= los) & (lat_arr <= his)).all(axis=1) if len(lat_arr) else np.zeros(0, dtype=bool)
                want = {tuple(int(x) for x in row) for row in lat_arr[in_win]}
            if snap.nodes != want:
                res.node_mismatches += 1
            stored, symmetric = _stored_edges(eng)
            if not symmetric or stored != _derived_edges(want, n):
                res.edge_mismatches += 1
            res.max_nodes_seen = max(res.max_nodes_seen, len(snap.nodes))
            if len(snap.nodes) > cap or r1.grow_candidates > cap_side or len(r1.removed) > cap_side:
                res.bound_violations += 1
            if snap.nodes:
                minimal = [v for v in snap.nodes if not snap.predecessors(v)]
                maximal = [v for v in snap.nodes if not snap.successors(v)]
                anchors_ok = (
                    minimal == [snap.c_min]
                    and maximal == [snap.c_max]
                    and any(snap.c_max[k] == his[k] for k in range(n))
                    and any(snap.c_min[k] == los[k] for k in range(n))
                )
                if not anchors_ok:
                    res.anchor_violations += 1
                arr = np.array(sorted(snap.nodes), dtype=np.int64)
                codes = set(int(c) for c in (arr * radix).sum(axis=1))
                if not _laws_hold(arr, codes, radix, rng, triple_samples):
                    res.law_violations += 1
                box = ((lat_arr >= arr.min(axis=0)) & (lat_arr <= arr.max(axis=0))).all(axis=1)
                if int(box.sum()) != len(snap.nodes):
                    res.convexity_violations += 1
                if len(snap.nodes) <= detection_node_limit:
                    res.detection_checks += 1
                    d = detect(prop, snap)
                    p = detect(pos, snap)
                    if d.holds and not p.holds:
                        res.implication_violations += 1
                    sat_cache: dict[Vec, bool] = {}

                    def sat(vec: Vec) -> bool:
                        got = sat_cache.get(vec)
                        if got is None:
                            got = all(
                                snap.state_at(k, vec[k]).payload["active"] for k in range(n)
                            )
                            sat_cache[vec] = got
                        return got

                    if d.holds != definitely_by_chains(snap, sat):
                        res.definitely_mismatches += 1
                    elif len(snap.nodes) <= deep_chain_limit:
                        if count_avoiding_chains(snap, sat) != dfs_avoiding_chains(snap, sat):
                            res.definitely_mismatches += 1
    _ = lat_codes
    return res


def run_equivalence_suite(
    num_traces: int = 500,
    seed: int = 2024,
    *,
    n_choices: Sequence[int] = (2, 3),
    w_choices: Sequence[int] = (1, 2, 3, 4),
    max_events: int = 25,
) -> CheckResult:
    """The randomized engine-vs-oracle corpus used by the acceptance gate."""
    total = CheckResult()
    for i in range(num_traces):
        rng = np.random.default_rng([seed, i])
        n = n_choices[i % len(n_choices)]
        w = w_choices[(i // len(n_choices)) % len(w_choices)]
        trace = random_trace(rng, n=n, max_events=max_events)
        total.merge(verify_trace(trace, w, rng))
    return total
