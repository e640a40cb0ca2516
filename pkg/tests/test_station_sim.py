import random

import pytest
from hypothesis import given, settings, strategies as st

from decharge.station_sim import (
    InfeasibleSelection, available_slots_in_range, observe_queue, update_station_state,
)

from oracles import oracle_queues, request, station


def test_two_ev_golden_case():
    # one slot free at 10:00; EV1 arrives 10:00 for 30 min, EV2 at 10:10 for 10 min
    s = station(0, free=[600.0])
    evs = [request(1, t=600, demand=30), request(2, t=610, demand=10)]
    out = update_station_state([s], evs, {1: 0, 2: 0})
    assert [a.wait_minutes for a in out] == [0.0, 20.0]
    assert s.slot_free_time == [640.0]
    assert s.window_queue_time == 20.0


def test_arrival_includes_travel():
    # 5 km at 30 km/h is 10 minutes of driving
    s = station(0, x=5.0, free=[600.0])
    evs = [request(1, t=590, demand=30), request(2, t=600, demand=10)]
    out = update_station_state([s], evs, {1: 0, 2: 0})
    assert [a.arrival_time for a in out] == [600.0, 610.0]
    assert out[1].wait_minutes == 20.0


def test_idle_slot_single_ev():
    s = station(0)
    out = update_station_state([s], [request(1, t=100, demand=15)], {1: 0})
    assert out[0].wait_minutes == 0.0
    assert s.slot_free_time == [115.0]


def test_three_evs_one_slot():
    s = station(0)
    evs = [request(i, t=0, demand=10) for i in (1, 2, 3)]
    out = update_station_state([s], evs, {1: 0, 2: 0, 3: 0})
    assert [a.wait_minutes for a in out] == [0.0, 10.0, 20.0]
    assert s.window_queue_time == 30.0


def test_lowest_free_slot_then_lowest_index():
    s = station(0, slots=3, free=[50.0, 20.0, 20.0])
    out = update_station_state([s], [request(1, t=30, demand=5)], {1: 0})
    assert out[0].slot_index == 1


def test_disabled_slots_skipped():
    s = station(0, slots=2, enabled=[False, True])
    out = update_station_state([s], [request(1, demand=5), request(2, demand=5)], {1: 0, 2: 0})
    assert [a.slot_index for a in out] == [1, 1]
    assert out[1].wait_minutes == 5.0


def test_errors():
    s = station(0, slots=2, enabled=[False, False])
    with pytest.raises(InfeasibleSelection):
        update_station_state([s], [request(1)], {1: 0})
    with pytest.raises(InfeasibleSelection):
        update_station_state([station(0)], [request(1)], {})
    with pytest.raises(InfeasibleSelection):
        update_station_state([station(0)], [request(1)], {1: 9})


def test_observe_queue_lifecycle():
    s = station(0)
    assert observe_queue(s) == 0.0
    update_station_state([s], [request(1, demand=30), request(2, t=10, demand=10)], {1: 0, 2: 0})
    assert observe_queue(s) == 20.0
    update_station_state([s], [], {})
    assert observe_queue(s) == 0.0


def test_available_slots_in_range():
    near = [station(0, slots=3), station(1, x=1.0, slots=3)]
    assert available_slots_in_range(near, request(1, t=5, max_km=5)) == 6
    far = [station(0, x=50.0, slots=3)]
    assert available_slots_in_range(far, request(1, max_km=5)) == 0
    busy = [station(0, slots=3, free=[50, 200, 200])]
    assert available_slots_in_range(busy, request(1, t=100, max_km=5)) == 1


windows = st.lists(
    st.tuples(st.floats(0, 300), st.floats(1, 90), st.integers(0, 2), st.floats(0, 4), st.floats(0, 4)),
    min_size=1, max_size=12,
)


def _setup(spec, slots):
    sts = [station(0, 0, 0, slots=slots), station(1, 3, 0, slots=slots), station(2, 0, 3, slots=slots)]
    reqs = [request(i, t=t, demand=d, x=x, y=y) for i, (t, d, _, x, y) in enumerate(spec)]
    sel = {i: m for i, (_, _, m, _, _) in enumerate(spec)}
    return sts, reqs, sel


@settings(max_examples=60, deadline=None)
@given(windows, st.integers(1, 2))
def test_matches_oracle_and_conserves_wait(spec, slots):
    sts, reqs, sel = _setup(spec, slots)
    expected = oracle_queues(sts, reqs, sel)
    before = [list(s.slot_free_time) for s in sts]
    out = update_station_state(sts, reqs, sel)
    for s in sts:
        assert s.window_queue_time == pytest.approx(expected[s.id], abs=1e-9)
        assert s.window_queue_time == pytest.approx(sum(a.wait_minutes for a in out if a.station_id == s.id))
    for s, b in zip(sts, before):
        assert all(x >= y for x, y in zip(s.slot_free_time, b))
    for a, r in zip(out, sorted(reqs, key=lambda r: (r.request_time, r.id))):
        assert a.request_id == r.id and a.wait_minutes >= 0 and a.arrival_time >= r.request_time


@settings(max_examples=40, deadline=None)
@given(windows, st.randoms(use_true_random=False))
def test_input_order_irrelevant(spec, rnd):
    sts_a, reqs, sel = _setup(spec, 1)
    sts_b, _, _ = _setup(spec, 1)
    shuffled = list(reqs)
    rnd.shuffle(shuffled)
    assert update_station_state(sts_a, reqs, sel) == update_station_state(sts_b, shuffled, sel)


@settings(max_examples=40, deadline=None)
@given(windows)
def test_fcfs_per_slot(spec):
    sts, reqs, sel = _setup(spec, 2)
    out = update_station_state(sts, reqs, sel)
    by_slot = {}
    for a in out:
        by_slot.setdefault((a.station_id, a.slot_index), []).append(a)
    for seq in by_slot.values():
        starts = [a.arrival_time + a.wait_minutes for a in seq]
        assert starts == sorted(starts)


def test_slot_clock_monotone_across_windows():
    rng = random.Random(4)
    s = station(0, slots=2)
    for w in range(5):
        before = list(s.slot_free_time)
        reqs = [request(10 * w + i, t=w * 120 + rng.uniform(0, 119), demand=rng.uniform(5, 80)) for i in range(4)]
        update_station_state([s], reqs, {r.id: 0 for r in reqs})
        assert all(x >= y for x, y in zip(s.slot_free_time, before))
