"""Comparison methods: Greedy, MGM, COHDA, and the DOC / SIC ablations."""

from __future__ import annotations

from dataclasses import replace
from typing import Mapping, Sequence

from .epos import IterationTrace, build_tree
from .objectives import SelectionVector, WindowEvaluator
from .options import ChargingOption
from .rng import COHDA_ORDER, TREE, derive_rng
from .scenario import ChargingRequest, ChargingStation, Scenario


def greedy_assign(
    window_requests: Sequence[ChargingRequest], options: Mapping[int, Sequence[ChargingOption]]
) -> tuple[SelectionVector, list[int]]:
    """Every request takes its lowest-discomfort option (lowest station id on ties).

    Returns the selection and the ids of requests with no option at all.
    """
    choices = {}
    unserved = []
    for r in window_requests:
        opts = options.get(r.id)
        if not opts:
            unserved.append(r.id)
            continue
        choices[r.id] = min(opts, key=lambda o: (o.discomfort, o.station_id)).station_id
    return SelectionVector(choices), sorted(unserved)


def mgm_round(evaluator: WindowEvaluator, neighbors: Mapping[int, Sequence[int]]) -> int:
    """One Maximum Gain Message round; returns the number of agents that moved.

    All agents compute their best unilateral gain on the same configuration. An
    agent moves only if its gain is positive and beats every tree neighbor's
    (lower request id wins ties). Non-adjacent winners still share the queue
    objective, so if their joint move raises the cost, only the single largest
    gain is applied.
    """
    n = len(evaluator)
    before = evaluator.cost()
    best = [evaluator.best_response(a) for a in range(n)]
    rid = [r.id for r in evaluator.requests]
    idx = evaluator.index
    winners = []
    for a in range(n):
        k, gain = best[a]
        if gain <= 0:
            continue
        if all((gain, -rid[a]) > (best[idx[b]][1], -b) for b in neighbors.get(rid[a], ())):
            winners.append(a)
    if not winners:
        return 0
    changes = [(a, evaluator.sel[a], best[a][0]) for a in winners]
    evaluator.apply(changes)
    if len(changes) > 1 and evaluator.cost() > before:
        evaluator.undo(changes)
        top = max(winners, key=lambda a: (best[a][1], -rid[a]))
        evaluator.move(top, best[top][0])
        return 1
    return len(changes)


def cohda_round(evaluator: WindowEvaluator, order: Sequence[int]) -> int:
    """Sequential best response over the shared working selection, in ``order``."""
    moved = 0
    for a in order:
        k, gain = evaluator.best_response(a)
        if gain > 0:
            evaluator.move(a, k)
            moved += 1
    return moved


def _run_rounds(evaluator, step, max_rounds: int) -> list[IterationTrace]:
    trace = [IterationTrace(0, evaluator.cost(), 0)]
    for i in range(1, max_rounds + 1):
        moved = step(i)
        trace.append(IterationTrace(i, evaluator.cost(), moved))
        if moved == 0:
            break
    return trace


def run_mgm(
    window_requests, options, betas, stations, max_rounds: int = 40,
    seed: int = 0, day: int = 0, window: int = 0, speed_kmh: float = 30.0,
) -> tuple[SelectionVector, list[IterationTrace], list[int]]:
    """MGM from the greedy selection on the tree neighbor graph."""
    served = [r for r in window_requests if options.get(r.id)]
    unserved = sorted(r.id for r in window_requests if not options.get(r.id))
    if not served:
        return SelectionVector({}), [], unserved
    ev = WindowEvaluator(served, options, stations, betas, speed_kmh)
    tree_seed = int(derive_rng(seed, TREE, day, window, 0).integers(2**63))
    neighbors = build_tree(served, tree_seed).neighbors()
    trace = _run_rounds(ev, lambda i: mgm_round(ev, neighbors), max_rounds)
    return ev.selection_vector(), trace, unserved


def run_cohda(
    window_requests, options, betas, stations, max_rounds: int = 40,
    seed: int = 0, day: int = 0, window: int = 0, speed_kmh: float = 30.0,
) -> tuple[SelectionVector, list[IterationTrace], list[int]]:
    """COHDA surrogate: seeded agent order, sequential best response per round."""
    served = [r for r in window_requests if options.get(r.id)]
    unserved = sorted(r.id for r in window_requests if not options.get(r.id))
    if not served:
        return SelectionVector({}), [], unserved
    ev = WindowEvaluator(served, options, stations, betas, speed_kmh)
    rng = derive_rng(seed, COHDA_ORDER, day, window)
    trace = _run_rounds(ev, lambda i: cohda_round(ev, [int(a) for a in rng.permutation(len(ev))]), max_rounds)
    return ev.selection_vector(), trace, unserved


def is_local_optimum(evaluator: WindowEvaluator) -> bool:
    """True when no single agent can lower the overall cost on its own."""
    return all(evaluator.best_response(a)[1] == 0.0 for a in range(len(evaluator)))


def run_doc(scenario: Scenario, config):
    """DECharge with distance-only discomfort (queue weight forced to 0)."""
    from .pipeline import run_day

    return run_day(scenario, replace(config, method="doc"))


def run_sic(scenario: Scenario, config):
    """DECharge with a single coordination window for the whole day."""
    from .pipeline import run_day

    return run_day(scenario, replace(config, method="sic"))
