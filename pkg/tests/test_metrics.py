import math

import pytest

from decharge.metrics import WindowRecord, compute_report
from decharge.pipeline import RunConfig, run_day
from decharge.scenario import GeneratorConfig, generate_scenario, synthetic_station_rows
from decharge.station_sim import Assignment


def _record(window, rows, queues, unserved=0):
    """rows: (request, station, distance km, wait min, demand min, discomfort)."""
    return WindowRecord(
        window=window,
        assignments=[Assignment(r, s, 0.0, w, 0) for r, s, _, w, _, _ in rows],
        distances={r: d for r, _, d, _, _, _ in rows},
        discomforts={r: c for r, *_, c in rows},
        station_queues=queues,
        demands={r: dm for r, _, _, _, dm, _ in rows},
        unserved=unserved,
    )


def test_estimated_waiting_single_ev():
    rep = compute_report([_record(0, [(1, 0, 15.0, 30.0, 20.0, 15.0)], {0: 30.0})], [0], speed_kmh=30)
    assert rep.estimated_waiting_h == pytest.approx(1.0)
    assert rep.actual_queuing_h == pytest.approx(0.5)
    assert rep.relative_travel_km == 15.0


def test_no_requests():
    rep = compute_report([_record(0, [], {0: 0.0, 1: 0.0})], [0, 1])
    assert rep.served == 0
    assert all(getattr(rep, c) == 0 for c in ("driver_discomfort", "system_inefficiency",
                                              "estimated_waiting_h", "max_station_demand_kj"))


def test_station_demand_energy():
    rep = compute_report([_record(0, [(1, 3, 0.0, 0.0, 30.0, 0.0), (2, 3, 0.0, 0.0, 10.0, 0.0)], {3: 0.0})],
                         [3], power_kw=7.0)
    assert rep.station_demand_kj == {3: 16_800.0}
    assert rep.max_station_demand_kj == 16_800.0


def test_means_and_overall_cost():
    recs = [
        _record(0, [(1, 0, 1.0, 10.0, 30, 2.0), (2, 1, 3.0, 0.0, 30, 4.0)], {0: 10.0, 1: 0.0}),
        _record(1, [], {0: 0.0, 1: 0.0}, unserved=2),
        _record(2, [(3, 1, 2.0, 20.0, 30, 6.0)], {0: 0.0, 1: 20.0}),
    ]
    rep = compute_report(recs, [0, 1])
    assert rep.driver_discomfort == pytest.approx(4.0)
    # windows without served requests do not enter the inefficiency mean
    assert rep.system_inefficiency == pytest.approx((math.sqrt(50) + math.sqrt(200)) / 2)
    assert rep.overall_operational_cost == pytest.approx((rep.driver_discomfort + rep.system_inefficiency) / 2)
    assert rep.actual_queuing_h == pytest.approx(10.0 / 60)
    assert rep.unserved == 2 and rep.served == 3
    assert len(rep.windows) == 3 and rep.windows[2].driver_discomfort == 6.0


def test_day_report_invariants():
    cfg = GeneratorConfig(num_requests=80, station_rows=synthetic_station_rows(20, 1), availability_ratio=0.5)
    sc = generate_scenario(cfg, 6)
    res = run_day(sc, RunConfig(repetitions=4, beta=0.5))
    rep = res.report
    served_demand = sum(r.demand for r in sc.requests if any(a[1] == r.id for a in res.assignment_rows))
    assert sum(rep.station_demand_kj.values()) == pytest.approx(served_demand * 60 * 7.0)
    waits = [a[5] for a in res.assignment_rows]
    assert rep.actual_queuing_h == pytest.approx(sum(waits) / len(waits) / 60)
    assert rep.estimated_waiting_h == pytest.approx(rep.actual_queuing_h + rep.relative_travel_km / sc.speed_kmh)
    for c in rep.COLUMNS:
        v = getattr(rep, c)
        assert math.isfinite(v) and v >= 0
