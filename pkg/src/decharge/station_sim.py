"""First-come-first-served slot assignment and per-window queue accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .scenario import ChargingRequest, ChargingStation


class InfeasibleSelection(ValueError):
    """A request was sent to a station it cannot use, or has no selection."""


@dataclass(frozen=True)
class Assignment:
    request_id: int
    station_id: int
    arrival_time: float
    wait_minutes: float
    slot_index: int


def travel_minutes(distance_km: float, speed_kmh: float) -> float:
    return 60.0 * distance_km / speed_kmh


def fcfs_order(requests: Sequence[ChargingRequest]) -> list[ChargingRequest]:
    return sorted(requests, key=lambda r: (r.request_time, r.id))


def update_station_state(
    stations: Sequence[ChargingStation],
    window_requests: Sequence[ChargingRequest],
    selections: Mapping[int, int],
    speed_kmh: float = 30.0,
) -> list[Assignment]:
    """Advance slot clocks for one window and rebuild every station's queue accumulator.

    Requests are served in (request_time, id) order. Each goes to the enabled
    slot that frees up first (lowest index on ties), waits for it if the slot is
    still busy when the EV arrives, and then occupies it for its demand.

    Returns the assignments in service order.
    """
    by_id = {s.id: s for s in stations}
    for s in stations:
        s.window_queue_time = 0.0
    out = []
    for r in fcfs_order(window_requests):
        if r.id not in selections:
            raise InfeasibleSelection(f"request {r.id} has no selected station")
        station = by_id.get(selections[r.id])
        if station is None:
            raise InfeasibleSelection(f"request {r.id} selected unknown station {selections[r.id]}")
        slots = station.enabled_slots
        if not slots:
            raise InfeasibleSelection(f"request {r.id} selected station {station.id} with no enabled slots")
        j = min(slots, key=lambda k: (station.slot_free_time[k], k))
        arrival = r.request_time + travel_minutes(r.location.distance(station.location), speed_kmh)
        free = station.slot_free_time[j]
        wait = max(free - arrival, 0.0)
        station.window_queue_time += wait
        station.slot_free_time[j] = max(free, arrival) + r.demand
        out.append(Assignment(r.id, station.id, arrival, wait, j))
    return out


def observe_queue(station: ChargingStation) -> float:
    """Queuing time left by the previous window's update (0 before the first window)."""
    return station.window_queue_time


def available_slots_in_range(stations: Sequence[ChargingStation], request: ChargingRequest) -> int:
    """Enabled slots, within the request's range, that are idle at its request time."""
    count = 0
    for s in stations:
        if request.location.distance(s.location) > request.max_distance:
            continue
        count += sum(1 for j in s.enabled_slots if s.slot_free_time[j] <= request.request_time)
    return count
