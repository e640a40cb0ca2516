"""Evaluation metrics and per-window / per-day run reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .objectives import rms
from .station_sim import Assignment

DEFAULT_POWER_KW = 7.0


@dataclass
class WindowRecord:
    """Raw per-window outcome gathered by the run loop."""

    window: int
    assignments: list[Assignment]
    distances: dict[int, float]
    discomforts: dict[int, float]
    station_queues: dict[int, float]
    demands: dict[int, float]
    unserved: int = 0
    betas: dict[int, float] = field(default_factory=dict)


@dataclass
class RunReport:
    driver_discomfort: float = 0.0
    system_inefficiency: float = 0.0
    overall_operational_cost: float = 0.0
    relative_travel_km: float = 0.0
    actual_queuing_h: float = 0.0
    estimated_waiting_h: float = 0.0
    max_station_demand_kj: float = 0.0
    station_demand_kj: dict[int, float] = field(default_factory=dict)
    served: int = 0
    unserved: int = 0
    mean_beta: float = 0.0
    seed: int = 0
    windows: list["RunReport"] = field(default_factory=list)

    COLUMNS = (
        "driver_discomfort", "system_inefficiency", "overall_operational_cost",
        "relative_travel_km", "actual_queuing_h", "estimated_waiting_h",
        "max_station_demand_kj", "served", "unserved", "mean_beta",
    )

    def row(self) -> dict:
        out = {c: getattr(self, c) for c in self.COLUMNS}
        out["station_demand_kj"] = ";".join(
            f"{sid}:{self.station_demand_kj[sid]!r}" for sid in sorted(self.station_demand_kj)
        )
        return out


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else 0.0


def compute_report(
    records: Sequence[WindowRecord],
    station_ids: Sequence[int],
    speed_kmh: float = 30.0,
    power_kw: float = DEFAULT_POWER_KW,
    seed: int = 0,
) -> RunReport:
    """Aggregate window records into a day report with one sub-report per window.

    Means over requests use served requests only; the inefficiency mean is over
    windows that served at least one request.
    """
    day = _aggregate(records, station_ids, speed_kmh, power_kw, seed)
    day.windows = [_aggregate([r], station_ids, speed_kmh, power_kw, seed) for r in records]
    return day


def _aggregate(records, station_ids, speed_kmh, power_kw, seed) -> RunReport:
    waits, travel, disc, est, betas = [], [], [], [], []
    o2s = []
    demand = {sid: 0.0 for sid in station_ids}
    unserved = 0
    for rec in records:
        unserved += rec.unserved
        betas.extend(rec.betas.values())
        if rec.assignments:
            o2s.append(rms(rec.station_queues.get(sid, 0.0) for sid in station_ids))
        for a in rec.assignments:
            d = rec.distances[a.request_id]
            waits.append(a.wait_minutes)
            travel.append(d)
            disc.append(rec.discomforts[a.request_id])
            est.append(a.wait_minutes / 60.0 + d / speed_kmh)
            demand[a.station_id] += rec.demands[a.request_id] * 60.0 * power_kw
    dd = _mean(disc)
    si = _mean(o2s)
    return RunReport(
        driver_discomfort=dd,
        system_inefficiency=si,
        overall_operational_cost=(dd + si) / 2.0,
        relative_travel_km=_mean(travel),
        actual_queuing_h=_mean(waits) / 60.0,
        estimated_waiting_h=_mean(est),
        max_station_demand_kj=max(demand.values(), default=0.0),
        station_demand_kj=demand,
        served=len(waits),
        unserved=unserved,
        mean_beta=_mean(betas),
        seed=seed,
    )
