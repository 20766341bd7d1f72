import math

import numpy as np
import pytest

from latwin.clocks import state_happens_before
from latwin.detection import Modality, Property
from latwin.engine import LatWinEngine
from latwin.simulate import (
    ActivityTimeline,
    SimConfig,
    deliver,
    generate,
    ground_truth,
    parse_duration,
)
from latwin.trace import recompute_clocks


def small_cfg(**kw):
    base = dict(n=2, seed=3, lifetime=1200.0, sample_period=60.0)
    base.update(kw)
    return SimConfig(**base)


def test_parse_duration():
    assert parse_duration(3) == 3.0
    assert parse_duration("25min") == 1500.0
    assert parse_duration("0.5s") == 0.5
    assert parse_duration("2h") == 7200.0
    assert parse_duration("250ms") == 0.25
    with pytest.raises(ValueError):
        parse_duration("soon")


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n=0)
    with pytest.raises(ValueError):
        SimConfig(mean_activity=0)
    with pytest.raises(ValueError):
        SimConfig(w=0)
    with pytest.raises(ValueError):
        SimConfig(mean_delay=-1)


def test_config_dict_roundtrip():
    cfg = SimConfig.from_dict(
        {"n": 2, "seed": 4, "mean_activity": "10min", "lifetime": "1h"}
    )
    assert cfg.mean_activity == 600.0
    assert cfg.lifetime == 3600.0
    assert SimConfig.from_dict(cfg.to_dict()) == cfg


def test_generate_deterministic():
    cfg = small_cfg()
    a = generate(cfg)
    b = generate(cfg)
    assert [(e.eid, e.clock.components, e.time) for e in a.events] == [
        (e.eid, e.clock.components, e.time) for e in b.events
    ]
    assert deliver(a, cfg) == deliver(b, cfg)


def test_no_messages_all_concurrent():
    cfg = small_cfg(peer_msg_rate=0.0)
    trace = generate(cfg)
    assert not trace.messages
    streams = trace.streams()
    for s1 in streams[0]:
        for s2 in streams[1]:
            assert not state_happens_before(s1, s2)
            assert not state_happens_before(s2, s1)


def test_clocks_recomputable():
    cfg = small_cfg(peer_msg_rate=40.0, mean_delay=2.0, seed=9)
    trace = generate(cfg)
    assert trace.messages
    rebuilt = recompute_clocks(trace)
    for ev in trace.events:
        assert rebuilt[ev.eid] == ev.clock


def test_causality_respects_true_time():
    cfg = small_cfg(peer_msg_rate=30.0, seed=12)
    trace = generate(cfg)
    timed = {(
        ts.state.process, ts.state.index): ts for ts in trace.timed_states}
    flat = [ts.state for ts in trace.timed_states]
    for s1 in flat:
        for s2 in flat:
            if s1 is not s2 and state_happens_before(s1, s2):
                end1 = timed[(s1.process, s1.index)].end
                begin2 = timed[(s2.process, s2.index)].begin
                assert end1 <= begin2 + 1e-9


def test_activity_duration_sample_mean():
    # Huge sample period suppresses ticks so phases dominate the cost.
    cfg = SimConfig(
        n=4,
        seed=21,
        lifetime=2_000 * 3600.0,
        sample_period=1e9,
        peer_msg_rate=0.0,
        mean_activity=25 * 60.0,
        mean_gap=5 * 60.0,
    )
    trace = generate(cfg)
    streams = trace.timed_streams()
    durations = []
    for stream in streams:
        for ts in stream:
            if ts.state.payload["active"] and ts.end < cfg.lifetime:
                durations.append(ts.end - ts.begin)
    assert len(durations) >= 10_000
    mean = float(np.mean(durations))
    assert abs(mean - cfg.mean_activity) / cfg.mean_activity < 0.05


def test_delivery_delay_sample_mean():
    offsets = []
    for seed in range(4):
        cfg = SimConfig(n=3, seed=seed, lifetime=3 * 3600.0, sample_period=10.0, mean_delay=0.5)
        trace = generate(cfg)
        begins = {(ts.state.process, ts.state.index): ts.begin for ts in trace.timed_states}
        for arrival, state in deliver(trace, cfg):
            offsets.append(arrival - begins[(state.process, state.index)])
    assert len(offsets) >= 10_000
    mean = float(np.mean(offsets))
    assert abs(mean - 0.5) / 0.5 < 0.05


def test_zero_delay_preserves_emission_order():
    cfg = small_cfg(mean_delay=0.0)
    trace = generate(cfg)
    schedule = deliver(trace, cfg)
    emitted = [(ts.state.process, ts.state.index) for ts in trace.timed_states]
    assert [(s.process, s.index) for _, s in schedule] == emitted


def test_out_of_order_arrival_is_reordered_by_engine():
    # Hunt a seed whose delivery inverts two states of one process, then
    # check the engine still consumes them in index order.
    inverted = None
    for seed in range(60):
        cfg = small_cfg(seed=seed, mean_delay=45.0, sample_period=30.0)
        trace = generate(cfg)
        schedule = deliver(trace, cfg)
        last = {}
        for _, state in schedule:
            if state.index < last.get(state.process, -1):
                inverted = (cfg, trace, schedule)
                break
            last[state.process] = max(last.get(state.process, -1), state.index)
        if inverted:
            break
    assert inverted is not None, "no inversion found; raise the delay"
    cfg, trace, schedule = inverted
    eng = LatWinEngine(cfg.n, cfg.w)
    delivered = []
    for _, state in schedule:
        delivered.extend(eng.on_receive(state))
        for s in eng.on_receive(state):
            raise AssertionError("duplicate offer must deliver nothing")
    per_proc = {}
    for s in delivered:
        assert s.index == per_proc.get(s.process, -1) + 1
        per_proc[s.process] = s.index
    assert sum(per_proc.values()) + len(per_proc) == len(trace.timed_states)


def test_ground_truth_spans():
    cfg = small_cfg(seed=5, lifetime=3600.0)
    trace = generate(cfg)
    prop = Property.conjunction(2, modality=Modality.DEFINITELY)
    tl = ActivityTimeline.build(trace, prop.locals)
    # Find an all-active instant and a not-all-active instant to anchor on.
    probe = np.linspace(0, 3599.0, 1500)
    active_t = next((t for t in probe if tl.any_all_true(t, t)), None)
    idle_t = next((t for t in probe if not tl.any_all_true(t, t)), None)
    if active_t is not None:
        assert ground_truth(trace, prop, (active_t, active_t)) is True
        assert ground_truth(trace, prop, (0.0, 3600.0)) is True
    if idle_t is not None:
        assert ground_truth(trace, prop, (idle_t, idle_t)) is False
        assert tl.any_not_all_true(idle_t, idle_t) is True
    with pytest.raises(ValueError):
        ground_truth(trace, prop, (10.0, 5.0))


def test_ground_truth_matches_sweep_oracle():
    # Independent oracle: evaluate the conjunction at every atomic segment
    # midpoint computed straight from the timed states.
    for seed in range(6):
        cfg = small_cfg(seed=seed, lifetime=1800.0)
        trace = generate(cfg)
        prop = Property.conjunction(2, modality=Modality.DEFINITELY)
        begins = sorted({ts.begin for ts in trace.timed_states})

        def truth_at(t):
            vals = []
            for stream in trace.timed_streams():
                current = None
                for ts in stream:
                    if ts.begin <= t:
                        current = ts.state.payload["active"]
                vals.append(bool(current))
            return all(vals)

        rng = np.random.default_rng(seed)
        for _ in range(25):
            t0, t1 = sorted(rng.uniform(0, 1800.0, size=2))
            points = [t0, t1] + [b for b in begins if t0 < b <= t1]
            mids = [t0] + [
                (a + b) / 2 for a, b in zip(sorted(points), sorted(points)[1:])
            ] + [t1]
            expect = any(truth_at(t) for t in sorted(set(points + mids)))
            assert ground_truth(trace, prop, (t0, t1)) == expect


def test_fifo_end_to_end():
    for seed in range(8):
        cfg = small_cfg(seed=seed, mean_delay=20.0, sample_period=15.0)
        trace = generate(cfg)
        eng = LatWinEngine(cfg.n, cfg.w)
        order = []
        for _, state in deliver(trace, cfg):
            order.extend((s.process, s.index) for s in eng.on_receive(state))
        for k in range(cfg.n):
            indices = [i for p, i in order if p == k]
            assert indices == list(range(len(indices)))
        assert len(order) == len(trace.timed_states)
