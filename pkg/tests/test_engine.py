import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latwin.clocks import LocalState, VectorClock
from latwin.engine import (
    LatWinEngine,
    NodeBudgetExceeded,
    ReorderQueue,
    WindowBuffer,
    read_delivery_jsonl,
    state_to_record,
    write_report_jsonl,
)
from latwin.oracle import random_trace


def chain_state(index, n=1, process=0, payload=None):
    clock = [0] * n
    clock[process] = index + 1
    return LocalState(
        process=process,
        index=index,
        clock=VectorClock(tuple(clock)),
        seq=index,
        payload=payload or {"active": True},
    )


# -- reorder queue -----------------------------------------------------------


def test_reorder_queue_in_order():
    q = ReorderQueue(0)
    for i in range(3):
        assert q.offer(chain_state(i)) == [chain_state(i).index] or True
        # in-order states come straight back
    q2 = ReorderQueue(0)
    for i in range(3):
        out = q2.offer(chain_state(i))
        assert [s.seq for s in out] == [i]


def test_reorder_queue_gapless_prefix():
    q = ReorderQueue(0)
    s = [chain_state(i) for i in range(3)]
    assert q.offer(s[2]) == []
    assert [x.seq for x in q.offer(s[0])] == [0]
    assert [x.seq for x in q.offer(s[1])] == [1, 2]


def test_reorder_queue_duplicates_counted():
    q = ReorderQueue(0)
    s0 = chain_state(0)
    q.offer(s0)
    assert q.offer(s0) == []
    assert q.duplicates == 1


@given(st.permutations(list(range(8))))
@settings(max_examples=60)
def test_reorder_queue_restores_order(perm):
    q = ReorderQueue(0)
    out = []
    for seq in perm:
        out.extend(s.seq for s in q.offer(chain_state(seq)))
    assert out == sorted(out) == list(range(8))


# -- window buffer -----------------------------------------------------------


def test_window_buffer_eviction():
    w = WindowBuffer(0, 2)
    assert w.push(chain_state(0)) is None
    assert w.push(chain_state(1)) is None
    evicted = w.push(chain_state(2))
    assert evicted.index == 0
    assert (w.min_index, w.max_index) == (1, 2)
    assert w.state_at(2).index == 2
    assert not w.contains_index(0)


def test_window_buffer_rejects_gaps():
    w = WindowBuffer(0, 3)
    w.push(chain_state(0))
    with pytest.raises(ValueError):
        w.push(chain_state(2))


def test_window_capacity_validated():
    with pytest.raises(ValueError):
        WindowBuffer(0, 0)


# -- engine basics -----------------------------------------------------------


def test_lone_process_no_cgs():
    eng = LatWinEngine(2, 3)
    for i in range(3):
        clock = (i + 1, 0)
        eng.advance(LocalState(process=0, index=i, clock=VectorClock(clock)))
    snap = eng.snapshot()
    assert snap.is_empty
    assert snap.c_min is None and snap.c_max is None


def test_heterogeneous_capacities_accepted():
    eng = LatWinEngine(2, [2, 5])
    assert eng.windows[0].capacity == 2
    assert eng.windows[1].capacity == 5


def test_single_process_chain():
    eng = LatWinEngine(1, 3)
    for i in range(6):
        eng.advance(chain_state(i))
    snap = eng.snapshot()
    assert snap.nodes == {(3,), (4,), (5,)}
    assert snap.c_min == (3,) and snap.c_max == (5,)
    assert eng.stats.max_nodes <= 3
    assert eng.stats.max_grow_candidates <= 1
    assert eng.stats.max_pruned <= 1


def test_node_budget_enforced():
    eng = LatWinEngine(1, None, node_budget=3)
    with pytest.raises(NodeBudgetExceeded):
        for i in range(10):
            eng.advance(chain_state(i))


def test_receive_reorders_and_advances():
    eng = LatWinEngine(1, 2)
    states = [chain_state(i) for i in range(3)]
    assert eng.receive(states[1]) == []
    reports = eng.receive(states[0])
    assert [r.index for r in reports] == [0, 1]
    reports = eng.receive(states[2])
    assert [r.index for r in reports] == [2]
    assert eng.stats.duplicates == 0
    eng.receive(states[2])
    assert eng.stats.duplicates == 1


# -- the narrated two-stream walkthrough (window size 3) ---------------------


def test_two_stream_walkthrough(two_stream):
    eng = LatWinEngine(2, 3)
    reports = {}
    snapshots = {}
    for key in two_stream.arrival_order:
        reports[key] = eng.advance(two_stream.state(*key))
        snapshots[key] = eng.snapshot()

    # Three states of P0 alone admit no global state.
    assert reports[(0, 2)].node_count == 0
    # P1's first three states pair with P0's initial state only.
    assert reports[(1, 0)].added == ((0, 0),)
    assert reports[(1, 2)].node_count == 3
    assert reports[(1, 2)].c_max == (0, 2)
    # P0's state 3 slides P0's window past index 0: everything is stale.
    assert reports[(0, 3)].added == ()
    assert reports[(0, 3)].removed == ((0, 0), (0, 1), (0, 2))
    assert reports[(0, 3)].node_count == 0
    assert reports[(0, 3)].c_min is None and reports[(0, 3)].c_max is None
    # P1's state 3 regrows the empty lattice from (1, 3).
    assert reports[(1, 3)].added == ((1, 3), (2, 3), (3, 3))
    assert reports[(1, 3)].c_min == (1, 3)
    assert reports[(1, 3)].c_max == (3, 3)
    # P0's state 4 cannot grow ((4, 3) is inconsistent) but prunes (1, 3).
    assert reports[(0, 4)].added == ()
    assert reports[(0, 4)].removed == ((1, 3),)
    assert reports[(0, 4)].c_min == (2, 3)
    assert reports[(0, 4)].c_max == (3, 3)
    # P1's state 4 grows to the five-node window lattice.
    assert reports[(1, 4)].added == ((2, 4), (3, 4), (4, 4))
    assert reports[(1, 4)].removed == ()
    assert reports[(1, 4)].c_min == (2, 3)
    assert reports[(1, 4)].c_max == (4, 4)
    # Snapshots are point-in-time copies, untouched by later advances.
    assert snapshots[(1, 4)].nodes == {(2, 3), (3, 3), (2, 4), (3, 4), (4, 4)}
    # P0's state 5 adds (5, 4) and prunes the column on P0's index 2.
    final = reports[(0, 5)]
    assert final.added == ((5, 4),)
    assert final.removed == ((2, 3), (2, 4))
    assert final.c_min == (3, 3)
    assert final.c_max == (5, 4)
    assert eng.snapshot().nodes == {(3, 3), (3, 4), (4, 4), (5, 4)}


def test_two_stream_walkthrough_prune_first(two_stream):
    eng = LatWinEngine(2, 3, prune_first=True, store_edges=False)
    last = None
    for key in two_stream.arrival_order:
        last = eng.advance(two_stream.state(*key))
    assert eng.snapshot().nodes == {(3, 3), (3, 4), (4, 4), (5, 4)}
    assert last.c_min == (3, 3) and last.c_max == (5, 4)


def test_walkthrough_edges_and_view_helpers(two_stream):
    eng = LatWinEngine(2, 3)
    for key in two_stream.arrival_order[:10]:  # through P1's state 4
        eng.advance(two_stream.state(*key))
    view = eng.snapshot()
    assert view.edges() == {
        ((2, 3), (3, 3)),
        ((2, 3), (2, 4)),
        ((3, 3), (3, 4)),
        ((2, 4), (3, 4)),
        ((3, 4), (4, 4)),
    }
    assert view.successors((2, 3)) == [(3, 3), (2, 4)]
    assert view.predecessors((4, 4)) == [(3, 4)]
    assert view.state_at(0, 3).index == 3


def test_determinism_identical_replay(two_stream):
    def run():
        eng = LatWinEngine(2, 3)
        return [
            (eng.advance(two_stream.state(*k)).added, frozenset(eng.snapshot().nodes))
            for k in two_stream.arrival_order
        ]

    assert run() == run()


def test_empty_seed_choice_immaterial():
    for i in range(40):
        rng = np.random.default_rng([95, i])
        trace = random_trace(rng, n=2, max_events=12)
        first = LatWinEngine(2, 2, seed_pick="first")
        last = LatWinEngine(2, 2, seed_pick="last")
        for ts in trace.timed_states:
            first.advance(ts.state)
            last.advance(ts.state)
            assert first.snapshot().nodes == last.snapshot().nodes


# -- replay wire format ------------------------------------------------------


def test_delivery_jsonl_roundtrip(two_stream):
    buf = io.StringIO()
    for key in two_stream.arrival_order:
        state = two_stream.state(*key)
        buf.write(__import__("json").dumps(state_to_record(state, 1.5)) + "\n")
    buf.seek(0)
    parsed = list(read_delivery_jsonl(buf))
    assert [(s.process, s.index) for s in parsed] == two_stream.arrival_order
    assert parsed[0].payload == {"active": True}
    assert parsed[3].clock == two_stream.state(1, 0).clock


def test_delivery_jsonl_bad_record():
    buf = io.StringIO('{"process": 0, "index": 1}\n')
    with pytest.raises(ValueError, match="line 1"):
        list(read_delivery_jsonl(buf))


def test_report_jsonl(two_stream):
    eng = LatWinEngine(2, 3)
    reports = [eng.advance(two_stream.state(*k)) for k in two_stream.arrival_order]
    buf = io.StringIO()
    write_report_jsonl(reports, buf)
    lines = buf.getvalue().strip().splitlines()
    assert len(lines) == len(reports)
    doc = __import__("json").loads(lines[-1])
    assert doc["added"] == [[5, 4]]
    assert doc["c_min"] == [3, 3]
