"""Per-request charging option generation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .scenario import ChargingRequest, ChargingStation
from .station_sim import observe_queue


@dataclass(frozen=True)
class ChargingOption:
    request_id: int
    station_id: int
    distance_km: float
    observed_queue_min: float
    discomfort: float
    request_time: float
    demand_min: float


def discomfort(distance_km: float, queue_min: float, alpha1: float, alpha2: float) -> float:
    """Weighted sum of travel distance (km) and observed queue (min)."""
    if distance_km < 0 or queue_min < 0:
        raise ValueError("distance and queue must be non-negative")
    if not (0.0 <= alpha1 <= 1.0 and 0.0 <= alpha2 <= 1.0):
        raise ValueError("alpha weights must lie in [0, 1]")
    return alpha1 * distance_km + alpha2 * queue_min


def generate_options(
    request: ChargingRequest,
    stations: Sequence[ChargingStation],
    alpha1: float = 1.0,
    alpha2: float = 1.0,
    max_options: int | None = None,
) -> list[ChargingOption]:
    """Options for every reachable station that has at least one working slot.

    Queue values are read from the stations as they stand, so call this before
    the window's station update. Sorted by (discomfort, station id); an empty
    list means the request cannot be served.
    """
    out = []
    for s in stations:
        if not s.has_capacity:
            continue
        d = request.location.distance(s.location)
        if d > request.max_distance:
            continue
        q = observe_queue(s)
        out.append(ChargingOption(request.id, s.id, d, q, discomfort(d, q, alpha1, alpha2),
                                  request.request_time, request.demand))
    out.sort(key=lambda o: (o.discomfort, o.station_id))
    if max_options is not None:
        out = out[:max_options]
    return out
