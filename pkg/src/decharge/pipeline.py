"""Day simulation loop shared by every method.

Per window: generate options from the queues left by the previous window,
assign behaviors, coordinate (or not), then advance the stations.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import greedy_assign, run_cohda, run_mgm
from .behavior import BehaviorPolicy, DemandPredictor, fit_predictor
from .epos import EposConfig, run_coordination
from .metrics import DEFAULT_POWER_KW, RunReport, WindowRecord, compute_report
from .options import generate_options
from .rng import ADVERSARY, HISTORY, derive_rng
from .scenario import Scenario, ScenarioError, requests_in_window
from .station_sim import update_station_state

METHODS = ("decharge", "greedy", "doc", "sic", "mgm", "cohda")


@dataclass
class RunConfig:
    method: str = "decharge"
    beta: float | None = None
    gamma: float = 1.0
    windows: int | None = None
    slots_ratio: float | None = None
    selfish_pct: float = 0.0
    repetitions: int = 40
    iterations: int = 40
    seed: int | None = None
    power_kw: float = DEFAULT_POWER_KW
    lags: int = 3
    history_days: int = 30
    strategy: str = "centroid"
    max_options: int | None = None
    predictor_file: str | None = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ScenarioError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ScenarioError("beta must lie in [0, 1]")
        if self.gamma <= 0:
            raise ScenarioError("gamma must be > 0")
        if not 0.0 <= self.selfish_pct <= 100.0:
            raise ScenarioError("selfish percentage must lie in [0, 100]")
        if self.slots_ratio is not None and not 0.0 <= self.slots_ratio <= 1.0:
            raise ScenarioError("slots ratio must lie in [0, 1]")
        if self.repetitions < 1 or self.iterations < 0:
            raise ScenarioError("repetitions must be >= 1 and iterations >= 0")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha1(blob.encode()).hexdigest()[:10]


@dataclass
class RunResult:
    report: RunReport
    config: RunConfig
    assignment_rows: list[tuple] = field(default_factory=list)
    trace_rows: list[tuple] = field(default_factory=list)
    selections: dict[int, dict[int, int]] = field(default_factory=dict)


def prepare(scenario: Scenario, config: RunConfig) -> Scenario:
    """Apply the config's structural overrides (outages, window count, SIC)."""
    if config.slots_ratio is not None:
        scenario = scenario.with_availability(config.slots_ratio)
    if config.windows is not None:
        scenario = scenario.with_windows(config.windows)
    if config.method == "sic":
        scenario = scenario.with_windows(1)
    return scenario


def synthetic_history(scenario: Scenario, days: int, seed: int) -> list[list[int]]:
    """Per-window request counts for ``days`` days drawn from the scenario's time histogram."""
    bins = np.asarray(scenario.time_hist_bins, dtype=float)
    edges = np.linspace(0.0, 1440.0, scenario.num_windows + 1)
    out = []
    for d in range(days):
        rng = derive_rng(seed, HISTORY, d)
        n = scenario.num_requests_expected or len(scenario.requests)
        idx = rng.choice(len(bins), size=n, p=bins[:, 2] / bins[:, 2].sum())
        t = bins[idx, 0] + rng.random(n) * (bins[idx, 1] - bins[idx, 0])
        out.append([int(c) for c in np.histogram(t, bins=edges)[0]])
    return out


def build_policy(scenario: Scenario, config: RunConfig, seed: int) -> BehaviorPolicy:
    """Behavior policy for a run; Greedy drivers are selfish by definition."""
    fixed = 1.0 if config.method == "greedy" else config.beta
    predictor = None
    if fixed is None:
        if config.predictor_file:
            predictor = DemandPredictor.load(config.predictor_file)
        elif len(scenario.time_hist_bins) and scenario.num_windows > config.lags:
            predictor = fit_predictor(synthetic_history(scenario, config.history_days, seed), config.lags)
    ids = sorted(r.id for r in scenario.requests)
    k = int(round(config.selfish_pct / 100.0 * len(ids)))
    chosen = derive_rng(seed, ADVERSARY, scenario.day).choice(len(ids), size=k, replace=False) if k else []
    return BehaviorPolicy(fixed, config.gamma, predictor, frozenset(ids[int(i)] for i in chosen))


def run_day(scenario: Scenario, config: RunConfig | None = None) -> RunResult:
    """Simulate one day with ``config.method`` and return the report plus logs."""
    config = config or RunConfig()
    config.validate()
    seed = scenario.seed if config.seed is None else config.seed
    sc = prepare(scenario, config)
    policy = build_policy(sc, config, seed)
    alpha2 = 0.0 if config.method == "doc" else sc.alpha2
    epos_cfg = EposConfig(config.iterations, config.repetitions, config.strategy)
    stations = sc.fresh_stations()
    result = RunResult(RunReport(), config)
    records = []
    counts = []
    for t in range(sc.num_windows):
        reqs = requests_in_window(sc, t)
        counts.append(len(reqs))
        observed = {s.id: s.window_queue_time for s in stations}
        options = {r.id: generate_options(r, stations, sc.alpha1, alpha2, config.max_options) for r in reqs}
        betas = policy.betas(reqs, stations, counts)
        served = [r for r in reqs if options[r.id]]
        served_betas = {r.id: betas[r.id] for r in served}
        trace = []
        if config.method == "greedy":
            selection, _ = greedy_assign(served, options)
        elif config.method in ("mgm", "cohda"):
            fn = run_mgm if config.method == "mgm" else run_cohda
            selection, tr, _ = fn(served, options, served_betas, stations, config.iterations,
                                  seed, sc.day, t, sc.speed_kmh)
            trace = [tr]
        else:
            res = run_coordination(served, options, served_betas, stations, epos_cfg,
                                   seed, sc.day, t, sc.speed_kmh)
            selection, trace = res.selection, res.traces
        assignments = update_station_state(stations, served, selection.choices, sc.speed_kmh)
        by_id = {r.id: r for r in served}
        st_loc = {s.id: s.location for s in stations}
        dist = {rid: by_id[rid].location.distance(st_loc[sid]) for rid, sid in selection.choices.items()}
        records.append(WindowRecord(
            window=t,
            assignments=assignments,
            distances=dist,
            discomforts={rid: sc.alpha1 * dist[rid] + sc.alpha2 * observed[sid]
                         for rid, sid in selection.choices.items()},
            station_queues={s.id: s.window_queue_time for s in stations},
            demands={r.id: r.demand for r in served},
            unserved=len(reqs) - len(served),
            betas=betas,
        ))
        result.selections[t] = dict(selection.choices)
        for a in assignments:
            result.assignment_rows.append((t, a.request_id, a.station_id, a.slot_index, a.arrival_time, a.wait_minutes))
        for rep, tr in enumerate(trace):
            for it in tr:
                result.trace_rows.append((t, rep, it.iteration, it.global_cost, it.num_changes))
    result.report = compute_report(records, [s.id for s in stations], sc.speed_kmh, config.power_kw, seed)
    return result
