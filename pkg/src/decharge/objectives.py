"""Driver discomfort, system inefficiency and the behavior-weighted overall cost.

The module-level functions are the reference definitions. ``WindowEvaluator``
computes the same overall cost incrementally for the coordination heuristics,
which evaluate thousands of single-agent moves per window.
"""

from __future__ import annotations

import bisect
import copy
import heapq
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .options import ChargingOption
from .scenario import ChargingRequest, ChargingStation
from .station_sim import fcfs_order, travel_minutes, update_station_state


@dataclass(frozen=True)
class SelectionVector:
    """One chosen station per request of a window (request id -> station id)."""

    choices: Mapping[int, int]

    def __getitem__(self, request_id: int) -> int:
        return self.choices[request_id]

    def __len__(self) -> int:
        return len(self.choices)

    def validate(self, options: Mapping[int, Sequence[ChargingOption]]) -> None:
        for rid, sid in self.choices.items():
            if not any(o.station_id == sid for o in options.get(rid, ())):
                raise ValueError(f"request {rid}: station {sid} is not among its options")


def rms(values) -> float:
    values = list(values)
    if not values:
        return 0.0
    return math.sqrt(math.fsum(v * v for v in values) / len(values))


def o1_discomfort(
    selection: SelectionVector, options: Mapping[int, Sequence[ChargingOption]]
) -> tuple[dict[int, float], float]:
    """Discomfort of each request's chosen option, and their sum."""
    per = {}
    for rid, sid in selection.choices.items():
        for o in options.get(rid, ()):
            if o.station_id == sid:
                per[rid] = o.discomfort
                break
        else:
            raise ValueError(f"request {rid}: station {sid} is not among its options")
    return per, math.fsum(per.values())


def o2_inefficiency(
    selection: SelectionVector,
    stations: Sequence[ChargingStation],
    window_requests: Sequence[ChargingRequest],
    speed_kmh: float = 30.0,
) -> float:
    """RMS over all stations of the window's actual queuing time, in minutes.

    The selection is replayed on scratch copies; ``stations`` are left untouched.
    """
    scratch = copy.deepcopy(list(stations))
    update_station_state(scratch, window_requests, selection.choices, speed_kmh)
    return rms(s.window_queue_time for s in scratch)


def overall_cost(
    per_request_discomfort: Mapping[int, float], o2: float, betas: Mapping[int, float]
) -> float:
    """Sum over requests of beta * own discomfort + (1 - beta) * window inefficiency."""
    terms = []
    for rid, d in per_request_discomfort.items():
        b = betas[rid]
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"request {rid}: beta {b} outside [0, 1]")
        terms.append(b * d + (1.0 - b) * o2)
    return math.fsum(terms)


def evaluate_selection(
    selection: SelectionVector,
    window_requests: Sequence[ChargingRequest],
    options: Mapping[int, Sequence[ChargingOption]],
    stations: Sequence[ChargingStation],
    betas: Mapping[int, float],
    speed_kmh: float = 30.0,
) -> tuple[float, float, float]:
    """(sum of O1, O2, overall cost) of a window selection by direct replay."""
    per, o1 = o1_discomfort(selection, options)
    o2 = o2_inefficiency(selection, stations, window_requests, speed_kmh)
    return o1, o2, overall_cost(per, o2, betas)


class WindowEvaluator:
    """Overall cost of one window under single-agent moves.

    Agents are the window's served requests in first-come order; each holds an
    index into its own option list. Per-station queues are recomputed only for
    the stations a move touches, and cached by station membership.
    """

    def __init__(
        self,
        window_requests: Sequence[ChargingRequest],
        options: Mapping[int, Sequence[ChargingOption]],
        stations: Sequence[ChargingStation],
        betas: Mapping[int, float],
        speed_kmh: float = 30.0,
    ):
        self.requests = fcfs_order(window_requests)
        self.index = {r.id: a for a, r in enumerate(self.requests)}
        self.num_stations = len(stations)
        self.station_ids = [s.id for s in stations]
        pos = {s.id: i for i, s in enumerate(stations)}
        self._slots = [sorted(s.slot_free_time[j] for j in s.enabled_slots) for s in stations]

        self.options: list[list[ChargingOption]] = []
        self.opt_station: list[list[int]] = []
        self.opt_disc: list[np.ndarray] = []
        self.option_of: list[dict[int, int]] = []
        self._arrival: list[dict[int, float]] = []
        self._solo_sq: list[np.ndarray] = []
        self.beta: list[float] = []
        for r in self.requests:
            opts = list(options[r.id])
            if not opts:
                raise ValueError(f"request {r.id} has no options")
            b = float(betas[r.id])
            if not 0.0 <= b <= 1.0:
                raise ValueError(f"request {r.id}: beta {b} outside [0, 1]")
            ms = [pos[o.station_id] for o in opts]
            arr = {m: r.request_time + travel_minutes(o.distance_km, speed_kmh) for m, o in zip(ms, opts)}
            solo = np.array([max(self._slots[m][0] - arr[m], 0.0) if self._slots[m] else math.inf for m in ms])
            self.options.append(opts)
            self.opt_station.append(ms)
            self.opt_disc.append(np.array([o.discomfort for o in opts]))
            self.option_of.append({m: k for k, m in enumerate(ms)})
            self._arrival.append(arr)
            self._solo_sq.append(solo * solo)
            self.beta.append(b)
        self.demand = [r.demand for r in self.requests]
        self.weight_o2 = math.fsum(1.0 - b for b in self.beta)
        self._cache: dict[tuple, float] = {}
        self.reset([0] * len(self.requests))

    def __len__(self) -> int:
        return len(self.requests)

    # -- state -----------------------------------------------------------------

    def reset(self, selection: Sequence[int]) -> None:
        n = len(self.requests)
        self.sel = list(selection)
        self.members: list[list[int]] = [[] for _ in range(self.num_stations)]
        for a in range(n):
            self.members[self.opt_station[a][self.sel[a]]].append(a)
        self.queue = [0.0] * self.num_stations
        self.occupied = set()
        for m, mem in enumerate(self.members):
            if mem:
                self.occupied.add(m)
                self.queue[m] = self.queue_of(m, tuple(mem))
        self._ss = math.fsum(self.queue[m] ** 2 for m in self.occupied)
        self._disc = math.fsum(self.beta[a] * self.opt_disc[a][self.sel[a]] for a in range(n))

    def queue_of(self, m: int, members: tuple) -> float:
        """Total wait at station ``m`` if exactly ``members`` (in FCFS order) use it."""
        key = (m, members)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        heap = list(self._slots[m])
        total = 0.0
        for a in members:
            arr = self._arrival[a][m]
            free = heap[0]
            if free > arr:
                total += free - arr
                heapq.heapreplace(heap, free + self.demand[a])
            else:
                heapq.heapreplace(heap, arr + self.demand[a])
        self._cache[key] = total
        return total

    def move(self, a: int, k: int) -> None:
        k0 = self.sel[a]
        if k == k0:
            return
        m0, m1 = self.opt_station[a][k0], self.opt_station[a][k]
        self.members[m0].remove(a)
        bisect.insort(self.members[m1], a)
        for m in (m0, m1):
            old = self.queue[m]
            new = self.queue_of(m, tuple(self.members[m])) if self.members[m] else 0.0
            self.queue[m] = new
            self._ss += new * new - old * old
            if self.members[m]:
                self.occupied.add(m)
            else:
                self.occupied.discard(m)
        self._disc += self.beta[a] * (self.opt_disc[a][k] - self.opt_disc[a][k0])
        self.sel[a] = k

    def apply(self, changes) -> None:
        for a, _, new in changes:
            self.move(a, new)

    def undo(self, changes) -> None:
        for a, old, _ in reversed(changes):
            self.move(a, old)

    # -- costs -----------------------------------------------------------------

    def o2(self) -> float:
        if not self.num_stations:
            return 0.0
        return math.sqrt(math.fsum(self.queue[m] ** 2 for m in self.occupied) / self.num_stations)

    def o1_sum(self) -> float:
        return math.fsum(self.opt_disc[a][self.sel[a]] for a in range(len(self.requests)))

    def cost(self) -> float:
        """Exact overall cost of the current selection (order-independent sums)."""
        n = len(self.requests)
        self._ss = math.fsum(self.queue[m] ** 2 for m in self.occupied)
        self._disc = math.fsum(self.beta[a] * self.opt_disc[a][self.sel[a]] for a in range(n))
        return self._disc + self.weight_o2 * self.o2()

    def candidate_costs(self, a: int) -> np.ndarray:
        """Overall cost for each option of agent ``a`` with everyone else fixed."""
        M = self.num_stations
        k0 = self.sel[a]
        m0 = self.opt_station[a][k0]
        q0 = self.queue[m0]
        without = tuple(x for x in self.members[m0] if x != a)
        q0p = self.queue_of(m0, without) if without else 0.0
        base_ss = self._ss - q0 * q0 + q0p * q0p
        ss = base_ss + self._solo_sq[a]
        option_of = self.option_of[a]
        for m in self.occupied:
            k = option_of.get(m)
            if k is None or m == m0:
                continue
            mem = self.members[m]
            i = bisect.bisect_left(mem, a)
            qn = self.queue_of(m, tuple(mem[:i]) + (a,) + tuple(mem[i:]))
            qm = self.queue[m]
            ss[k] = base_ss - qm * qm + qn * qn
        ss[k0] = self._ss
        base_disc = self._disc - self.beta[a] * self.opt_disc[a][k0]
        return base_disc + self.beta[a] * self.opt_disc[a] + self.weight_o2 * np.sqrt(np.maximum(ss, 0.0) / M)

    def best_response(self, a: int) -> tuple[int, float]:
        """Best option for ``a`` and its cost gain; the incumbent wins near-ties."""
        costs = self.candidate_costs(a)
        k0 = self.sel[a]
        best = int(np.argmin(costs))
        if costs[best] < costs[k0] - tolerance(costs[k0]):
            return best, float(costs[k0] - costs[best])
        return k0, 0.0

    def selection_vector(self) -> SelectionVector:
        return SelectionVector({
            r.id: self.station_ids[self.opt_station[a][self.sel[a]]] for a, r in enumerate(self.requests)
        })


def tolerance(value: float) -> float:
    """Smallest cost decrease that counts as an improvement."""
    return 1e-9 * (1.0 + abs(value))
