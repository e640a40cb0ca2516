"""Tree-structured collective learning (I-EPOS) over one window's charging options.

One iteration is a bottom-up pass followed by a top-down pass over a balanced
binary tree of agents:

* bottom-up: every agent first decides which of its children's branch changes
  to approve (the subset that minimizes the overall cost of the previous
  global selection patched with those changes), then picks its own best option
  given the approved branches. Its branch response is the approved children's
  changes plus its own.
* top-down: approvals are multiplied down the tree, so a change survives only
  if every ancestor approved it. The root's branch response is exactly the set
  of surviving changes.

Because the root can always reject everything, the global cost never rises.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .objectives import SelectionVector, WindowEvaluator, tolerance
from .options import ChargingOption
from .rng import START, TREE, derive_rng
from .scenario import ChargingRequest, ChargingStation


@dataclass(frozen=True)
class TreeTopology:
    """Balanced binary tree in level order: node ``i`` has children ``2i+1, 2i+2``."""

    agents: tuple[int, ...]
    seed: int = 0

    def __len__(self) -> int:
        return len(self.agents)

    def parent(self, i: int) -> int | None:
        return (i - 1) // 2 if i > 0 else None

    def children(self, i: int) -> list[int]:
        return [c for c in (2 * i + 1, 2 * i + 2) if c < len(self.agents)]

    def depth(self) -> int:
        return len(self.agents).bit_length()

    def neighbors(self) -> dict[int, list[int]]:
        """Tree adjacency keyed by agent (request) id."""
        out = {a: [] for a in self.agents}
        for i in range(1, len(self.agents)):
            p = self.parent(i)
            out[self.agents[i]].append(self.agents[p])
            out[self.agents[p]].append(self.agents[i])
        return out


class EmptyWindow(Exception):
    """No agents to coordinate."""


def build_tree(
    window_requests: Sequence[ChargingRequest], positioning_seed: int, strategy: str = "centroid"
) -> TreeTopology:
    """Order agents and fill a complete binary tree level by level.

    ``centroid`` sorts agents by distance to the window's request centroid and
    shuffles within quartile blocks, so agents near the centre sit near the
    root while the seed still repositions them. ``pure-random`` shuffles all.
    """
    if not window_requests:
        raise EmptyWindow()
    rng = np.random.default_rng(positioning_seed)
    reqs = sorted(window_requests, key=lambda r: r.id)
    if strategy == "pure-random":
        order = [reqs[i].id for i in rng.permutation(len(reqs))]
    elif strategy == "centroid":
        cx = math.fsum(r.location.x_km for r in reqs) / len(reqs)
        cy = math.fsum(r.location.y_km for r in reqs) / len(reqs)
        ranked = sorted(reqs, key=lambda r: (math.hypot(r.location.x_km - cx, r.location.y_km - cy), r.id))
        order = []
        for block in np.array_split(np.arange(len(ranked)), 4):
            order.extend(ranked[int(i)].id for i in rng.permutation(block))
    else:
        raise ValueError(f"unknown tree strategy {strategy!r}")
    return TreeTopology(tuple(order), int(positioning_seed))


@dataclass
class AgentState:
    request_id: int
    num_options: int
    selected: int = 0
    previous: int = 0
    approved: bool = True
    branch: Counter = field(default_factory=Counter)


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    global_cost: float
    num_changes: int


@dataclass
class EposConfig:
    max_iterations: int = 40
    repetitions: int = 40
    strategy: str = "centroid"


@dataclass
class CoordinationResult:
    selection: SelectionVector
    cost: float
    repetition: int
    traces: list[list[IterationTrace]]
    unserved: list[int] = field(default_factory=list)


def _subsets(indices):
    for size in range(1, len(indices) + 1):
        yield from combinations(indices, size)


def run_iteration(
    topology: TreeTopology,
    states: Sequence[AgentState],
    evaluator: WindowEvaluator,
    iteration: int = 1,
) -> IterationTrace:
    """One bottom-up/top-down pass; ``states`` are indexed like the evaluator's agents."""
    node_agent = [evaluator.index[rid] for rid in topology.agents]
    n = len(node_agent)
    prev_cost = evaluator.cost()
    approved = [True] * n

    def process(i: int) -> list[tuple[int, int, int]]:
        kids = topology.children(i)
        deltas = [process(c) for c in kids]
        changed = [ci for ci, d in enumerate(deltas) if d]
        accept: tuple = ()
        if changed:
            best = evaluator.cost()
            for subset in _subsets(changed):
                patch = [ch for ci in subset for ch in deltas[ci]]
                evaluator.apply(patch)
                c = evaluator.cost()
                evaluator.undo(patch)
                if c < best - tolerance(best):
                    best, accept = c, subset
        for ci, c in enumerate(kids):
            approved[c] = ci in accept or not deltas[ci]
        branch = [ch for ci in accept for ch in deltas[ci]]
        evaluator.apply(branch)
        a = node_agent[i]
        old = evaluator.sel[a]
        new, _ = evaluator.best_response(a)
        if new != old:
            branch.append((a, old, new))
            evaluator.move(a, new)
        evaluator.undo(branch)
        return branch

    changes = process(0) if n else []
    # Top-down: a change survives only under an all-approve chain to the root.
    chain = [True] * n
    for i in range(1, n):
        chain[i] = approved[i] and chain[(i - 1) // 2]
    evaluator.apply(changes)
    cost = evaluator.cost()
    if cost > prev_cost:
        evaluator.undo(changes)
        changes, cost = [], evaluator.cost()
    changed = {a for a, _, _ in changes}
    for i, a in enumerate(node_agent):
        st = states[a]
        st.previous = st.selected
        st.selected = evaluator.sel[a]
        st.approved = chain[i]
    _refresh_branches(topology, states, evaluator, node_agent)
    return IterationTrace(iteration, cost, len(changed))


def _refresh_branches(topology, states, evaluator, node_agent) -> None:
    for i in range(len(node_agent) - 1, -1, -1):
        a = node_agent[i]
        b = Counter({evaluator.station_ids[evaluator.opt_station[a][evaluator.sel[a]]]: 1})
        for c in topology.children(i):
            b.update(states[node_agent[c]].branch)
        states[a].branch = b


def run_coordination(
    window_requests: Sequence[ChargingRequest],
    options: Mapping[int, Sequence[ChargingOption]],
    betas: Mapping[int, float],
    stations: Sequence[ChargingStation],
    config: EposConfig | None = None,
    seed: int = 0,
    day: int = 0,
    window: int = 0,
    speed_kmh: float = 30.0,
) -> CoordinationResult:
    """Run all repetitions and keep the one with the lowest final cost.

    Requests without options are reported as unserved. Each repetition gets a
    freshly seeded tree. Repetition 0 starts from every agent's lowest-discomfort
    option (so its first trace entry is the Greedy cost); later repetitions start
    from a seeded random option per agent. Restarting every repetition from the
    same greedy point leaves the search stuck in one basin far too often.
    """
    config = config or EposConfig()
    served = [r for r in window_requests if options.get(r.id)]
    unserved = sorted(r.id for r in window_requests if not options.get(r.id))
    if not served:
        return CoordinationResult(SelectionVector({}), 0.0, 0, [], unserved)
    ev = WindowEvaluator(served, options, stations, betas, speed_kmh)
    best = None
    traces = []
    for rep in range(max(1, config.repetitions)):
        ev.reset(_start_selection(ev, seed, day, window, rep))
        tree_seed = int(derive_rng(seed, TREE, day, window, rep).integers(2**63))
        tree = build_tree(served, tree_seed, config.strategy)
        states = [AgentState(r.id, len(ev.options[a])) for a, r in enumerate(ev.requests)]
        trace = [IterationTrace(0, ev.cost(), 0)]
        for it in range(1, config.max_iterations + 1):
            tr = run_iteration(tree, states, ev, it)
            trace.append(tr)
            if tr.num_changes == 0:
                break
        traces.append(trace)
        final = trace[-1].global_cost
        if best is None or final < best[0]:
            best = (final, rep, ev.selection_vector())
    return CoordinationResult(best[2], best[0], best[1], traces, unserved)


def _start_selection(ev: WindowEvaluator, seed: int, day: int, window: int, rep: int) -> list[int]:
    if rep == 0:
        return [0] * len(ev)
    rng = derive_rng(seed, START, day, window, rep)
    return [int(rng.integers(len(ev.options[a]))) for a in range(len(ev))]
