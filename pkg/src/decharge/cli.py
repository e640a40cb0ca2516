"""Command-line experiment harness: ``decharge {stations,gen,run,sweep,predictor}``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .behavior import fit_predictor
from .pipeline import METHODS, RunConfig, run_day, synthetic_history
from .scenario import (
    GeneratorConfig, ScenarioError, dump_scenario, generate_scenario, load_scenario,
    synthetic_station_rows, write_station_csv,
)

BASE_COLUMNS = ("day", "method", "config_hash", "seed")
METRIC_COLUMNS = (
    "driver_discomfort", "system_inefficiency", "overall_operational_cost",
    "relative_travel_km", "actual_queuing_h", "estimated_waiting_h",
    "max_station_demand_kj", "served", "unserved", "mean_beta", "station_demand_kj",
)
SWEEP_AXES = {"beta": "beta", "slots": "slots_ratio", "windows": "windows", "selfish_pct": "selfish_pct"}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _emit(text: str, out: str | None, append: bool = False) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if append and path.exists() and path.stat().st_size:
        text = text.split("\n", 1)[1]
        with path.open("a", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _report_rows(result, scenario, per_window: bool, prefix=()) -> list[list]:
    cfg = result.config
    seed = result.report.seed
    base = [scenario.day, cfg.method, cfg.digest(), seed, *prefix]
    rows = [base + ["day"] + [result.report.row()[c] for c in METRIC_COLUMNS]]
    if per_window:
        for t, w in enumerate(result.report.windows):
            rows.append(base + [t] + [w.row()[c] for c in METRIC_COLUMNS])
    return rows


def _run_config(args, method: str) -> RunConfig:
    cfg = RunConfig(
        method=method, beta=args.beta, gamma=args.gamma, windows=args.windows,
        slots_ratio=args.slots_ratio, selfish_pct=args.selfish_pct,
        repetitions=args.repetitions, iterations=args.iterations, seed=args.seed,
        power_kw=args.power_kw, strategy=args.tree, predictor_file=args.predictor,
    )
    cfg.validate()
    return cfg


def cmd_stations(args) -> None:
    write_station_csv(synthetic_station_rows(args.num, args.seed, args.slots), args.out)


def cmd_gen(args) -> None:
    config = GeneratorConfig.from_file(args.config)
    scenario = generate_scenario(config, args.seed, day=args.day)
    text = dump_scenario(scenario)
    try:
        Path(args.out).write_text(text, encoding="utf-8")
    except OSError as err:
        raise ScenarioError(f"cannot write {args.out}: {err}") from None


def cmd_run(args) -> None:
    scenario = load_scenario(args.scenario)
    result = run_day(scenario, _run_config(args, args.method))
    header = [*BASE_COLUMNS, "window", *METRIC_COLUMNS]
    _emit(_csv_text(header, _report_rows(result, scenario, args.per_window)), args.out, args.append)
    if args.log_epos:
        Path(args.log_epos).write_text(_csv_text(
            ["window", "repetition", "iteration", "global_cost", "num_changes"], result.trace_rows), encoding="utf-8")
    if args.log_assignments:
        Path(args.log_assignments).write_text(_csv_text(
            ["window", "request_id", "station_id", "slot", "arrival_min", "wait_min"], result.assignment_rows),
            encoding="utf-8")


def _parse_value(axis: str, raw: str):
    return int(raw) if axis == "windows" else float(raw)


def _sweep_cell(cell):
    scenario, config = cell
    return run_day(scenario, config)


def cmd_sweep(args) -> None:
    if args.axis not in SWEEP_AXES:
        raise ScenarioError(f"unknown axis {args.axis!r}; choose from {', '.join(SWEEP_AXES)}")
    values = [v for v in (s.strip() for s in args.values.split(",")) if v]
    if not values:
        raise ScenarioError("--values must list at least one value")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ScenarioError("--methods must list at least one method")
    scenario = load_scenario(args.scenario)
    cells, keys = [], []
    for m in methods:
        base = _run_config(args, m)
        for raw in values:
            cfg = replace(base, **{SWEEP_AXES[args.axis]: _parse_value(args.axis, raw)})
            cfg.validate()
            cells.append((scenario, cfg))
            keys.append((m, raw))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    rows = []
    for (m, raw), res in zip(keys, results):
        rows.extend(_report_rows(res, scenario, args.per_window, prefix=(args.axis, raw)))
    header = [*BASE_COLUMNS, "axis", "value", "window", *METRIC_COLUMNS]
    _emit(_csv_text(header, rows), args.out, args.append)


def cmd_predictor(args) -> None:
    scenario = load_scenario(args.scenario)
    if not scenario.time_hist_bins:
        raise ScenarioError("scenario carries no time histogram to train on")
    seed = scenario.seed if args.seed is None else args.seed
    fit_predictor(synthetic_history(scenario, args.days, seed), args.lags).save(args.out)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="run seed (default: scenario seed)")
    p.add_argument("--beta", type=float, default=None, help="fixed behavior for every EV (default: recommended)")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--windows", type=int, default=None)
    p.add_argument("--slots-ratio", type=float, default=None)
    p.add_argument("--selfish-pct", type=float, default=0.0)
    p.add_argument("--repetitions", type=int, default=40)
    p.add_argument("--iterations", type=int, default=40)
    p.add_argument("--power-kw", type=float, default=7.0)
    p.add_argument("--tree", choices=("centroid", "pure-random"), default="centroid")
    p.add_argument("--predictor", default=None, help="demand predictor JSON (default: trained on synthetic history)")
    p.add_argument("--per-window", action="store_true", help="also emit one row per window")
    p.add_argument("--out", default=None)
    p.add_argument("--append", action="store_true", help="append rows to an existing --out file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decharge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stations", help="write a synthetic station CSV")
    p.add_argument("--num", type=int, default=91)
    p.add_argument("--slots", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stations)

    p = sub.add_parser("gen", help="generate a scenario document from a generator config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--day", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="simulate one day with one method")
    p.add_argument("scenario")
    p.add_argument("--method", choices=METHODS, default="decharge")
    p.add_argument("--log-epos", default=None)
    p.add_argument("--log-assignments", default=None)
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="cross-product of methods and one swept parameter")
    p.add_argument("scenario")
    p.add_argument("--axis", required=True, choices=tuple(SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--methods", default="decharge", help="comma-separated methods")
    p.add_argument("--jobs", type=int, default=1)
    _add_run_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predictor", help="fit and save the demand predictor for a scenario")
    p.add_argument("scenario")
    p.add_argument("--lags", type=int, default=3)
    p.add_argument("--days", type=int, default=30)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predictor)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ScenarioError, ValueError, OSError) as err:
        print(f"decharge: error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
