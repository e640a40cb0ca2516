"""Charging-behavior recommendation and the lagged demand predictor behind it."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .scenario import ChargingRequest, ChargingStation
from .station_sim import available_slots_in_range


@dataclass(frozen=True)
class DemandPredictor:
    """Linear model: next-window count from the previous ``lags`` window counts.

    ``coefficients[0]`` is the intercept, ``coefficients[1:]`` weight the counts
    oldest first. A rank-deficient fit falls back to predicting the mean target.
    """

    lags: int
    coefficients: tuple[float, ...]
    residual_rms: float = 0.0
    fallback: bool = False

    def predict(self, recent_counts: Sequence[float]) -> float:
        if len(recent_counts) < self.lags:
            raise ValueError(f"need {self.lags} recent counts, got {len(recent_counts)}")
        x = recent_counts[len(recent_counts) - self.lags:]
        y = self.coefficients[0] + math.fsum(c * v for c, v in zip(self.coefficients[1:], x))
        return max(y, 0.0)

    def to_json(self) -> str:
        return json.dumps({
            "lags": self.lags, "coefficients": list(self.coefficients),
            "residual_rms": self.residual_rms, "fallback": self.fallback,
        }, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DemandPredictor":
        doc = json.loads(text)
        coef = tuple(float(c) for c in doc["coefficients"])
        if len(coef) != int(doc["lags"]) + 1 or not all(math.isfinite(c) for c in coef):
            raise ValueError("predictor document: coefficients must be lags + 1 finite numbers")
        return cls(int(doc["lags"]), coef, float(doc.get("residual_rms", 0.0)), bool(doc.get("fallback", False)))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DemandPredictor":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def lag_design(history: Sequence[Sequence[float]], lags: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack (intercept, lagged counts) rows and next-window targets, day by day."""
    rows, target = [], []
    for day in history:
        day = [float(v) for v in day]
        for t in range(lags, len(day)):
            rows.append([1.0] + day[t - lags:t])
            target.append(day[t])
    return np.asarray(rows, dtype=float).reshape(-1, lags + 1), np.asarray(target, dtype=float)


def ols_coefficients(X: np.ndarray, y: np.ndarray, rcond: float = 1e-10) -> np.ndarray | None:
    """Least-squares coefficients from the normal equations; None if singular."""
    gram = X.T @ X
    w = np.linalg.eigvalsh(gram)
    if w.size == 0 or w[0] <= rcond * max(w[-1], 1.0):
        return None
    L = np.linalg.cholesky(gram)
    z = np.linalg.solve(L, X.T @ y)
    return np.linalg.solve(L.T, z)


def fit_predictor(history: Sequence[Sequence[float]], lags: int = 3) -> DemandPredictor:
    """Fit the lag model on per-day, per-window request counts."""
    if lags < 1:
        raise ValueError("lags must be >= 1")
    if len(history) < 2 or any(len(day) < lags + 1 for day in history):
        raise ValueError(f"history needs >= 2 days of >= {lags + 1} windows")
    X, y = lag_design(history, lags)
    beta = ols_coefficients(X, y)
    if beta is None:
        coef = (float(y.mean()),) + (0.0,) * lags
        resid = y - y.mean()
        return DemandPredictor(lags, coef, float(np.sqrt(np.mean(resid ** 2))), fallback=True)
    resid = y - X @ beta
    return DemandPredictor(lags, tuple(float(b) for b in beta), float(np.sqrt(np.mean(resid ** 2))))


def demand_growth(predicted_next: float, current_count: int) -> float:
    """Predicted relative growth of demand, clamped to [0, 1]."""
    if current_count <= 0:
        return 0.0
    return min(max(predicted_next / current_count - 1.0, 0.0), 1.0)


def recommend_beta(
    request: ChargingRequest,
    stations: Sequence[ChargingStation],
    window_count: int,
    omega: float = 0.0,
    gamma: float = 1.0,
) -> float:
    """Behavior weight from idle slots in range relative to (forecast-inflated) demand."""
    if window_count < 1:
        raise ValueError("window_count must be >= 1")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    slots = available_slots_in_range(stations, request)
    return beta_from_counts(slots, window_count, omega, gamma)


def beta_from_counts(available_slots: int, window_count: int, omega: float, gamma: float = 1.0) -> float:
    raw = gamma * available_slots / (window_count * (1.0 + omega))
    return min(max(raw, 0.0), 1.0)


@dataclass
class BehaviorPolicy:
    """Per-window beta assignment: fixed value or recommendation, then adversaries."""

    fixed_beta: float | None = None
    gamma: float = 1.0
    predictor: DemandPredictor | None = None
    selfish: frozenset = field(default_factory=frozenset)

    def omega(self, counts_so_far: Sequence[int]) -> float:
        if self.predictor is None or len(counts_so_far) < self.predictor.lags or not counts_so_far[-1]:
            return 0.0
        return demand_growth(self.predictor.predict(counts_so_far), counts_so_far[-1])

    def betas(self, window_requests, stations, counts_so_far: Sequence[int]) -> dict[int, float]:
        out = {}
        if self.fixed_beta is None and window_requests:
            om = self.omega(counts_so_far)
            for r in window_requests:
                out[r.id] = recommend_beta(r, stations, len(window_requests), om, self.gamma)
        else:
            for r in window_requests:
                out[r.id] = 1.0 if self.fixed_beta is None else self.fixed_beta
        for rid in out:
            if rid in self.selfish:
                out[rid] = 1.0
        return out
