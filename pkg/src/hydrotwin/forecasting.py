"""Inflow forecasting for the upstream storage.

Two baselines (seasonal naive, moving average) and a feature-driven model
that boosts on lag and weather covariates, iterated one step ahead over the
horizon. Accuracy reporting includes MASE against the in-sample seasonal
naive.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Sequence

import numpy as np

from . import learner
from .errors import (
    CoverageError,
    DimensionError,
    DomainError,
    InsufficientHistoryError,
)


@dataclass(frozen=True)
class TimeSeries:
    timestamps: tuple[datetime, ...]
    values: np.ndarray
    step_minutes: int

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(self.timestamps) != v.shape[0]:
            raise DimensionError("timestamps and values must align 1:1")
        if not np.all(np.isfinite(v)):
            raise DomainError("series values must be finite")
        step = timedelta(minutes=self.step_minutes)
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if b - a != step:
                raise DomainError(f"timestamps not equally spaced at {a} -> {b}")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_start(
        cls, start: datetime, values: Sequence[float], step_minutes: int
    ) -> "TimeSeries":
        stamps = tuple(
            start + timedelta(minutes=step_minutes * i) for i in range(len(values))
        )
        return cls(stamps, np.asarray(values, dtype=float), step_minutes)

    def future_timestamps(self, horizon: int) -> tuple[datetime, ...]:
        last = self.timestamps[-1]
        step = timedelta(minutes=self.step_minutes)
        return tuple(last + step * (h + 1) for h in range(horizon))


@dataclass(frozen=True)
class ExogFeatures:
    """Known covariates per step: day-of-week one-hot, rainfall, max temp.

    Must cover the history plus the forecast horizon (future weather is a
    known input at planning time).
    """

    timestamps: tuple[datetime, ...]
    rainfall_mm: np.ndarray
    temp_max_c: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rainfall_mm, dtype=float)
        t = np.asarray(self.temp_max_c, dtype=float)
        if not (len(self.timestamps) == r.shape[0] == t.shape[0]):
            raise DimensionError("exogenous columns must align with timestamps")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise DomainError("exogenous values must be finite")
        object.__setattr__(self, "rainfall_mm", r)
        object.__setattr__(self, "temp_max_c", t)

    def __len__(self) -> int:
        return self.rainfall_mm.shape[0]

    def row(self, i: int) -> np.ndarray:
        onehot = np.zeros(7)
        onehot[self.timestamps[i].weekday()] = 1.0
        return np.concatenate([onehot, [self.rainfall_mm[i]], [self.temp_max_c[i]]])

    def matrix(self) -> np.ndarray:
        return np.vstack([self.row(i) for i in range(len(self))])


@dataclass(frozen=True)
class ForecastResult:
    values: np.ndarray
    method: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class AccuracyReport:
    mae: float
    rmse: float
    mase: float | None


def seasonal_naive(series: TimeSeries, period: int, horizon: int) -> ForecastResult:
    """forecast[h] repeats the last observed season."""
    if period < 1 or horizon < 1:
        raise DomainError("period and horizon must be positive")
    n = len(series)
    if n < period:
        raise InsufficientHistoryError(
            f"need at least {period} observations, have {n}"
        )
    vals = np.array(
        [series.values[n - period + (h % period)] for h in range(horizon)]
    )
    return ForecastResult(vals, "seasonal_naive")


def moving_average(series: TimeSeries, window: int, horizon: int) -> ForecastResult:
    if window < 1 or horizon < 1:
        raise DomainError("window and horizon must be positive")
    if len(series) < window:
        raise InsufficientHistoryError(
            f"need at least {window} observations, have {len(series)}"
        )
    mean = float(series.values[-window:].mean())
    return ForecastResult(np.full(horizon, mean), "moving_average")


@dataclass(frozen=True)
class FeatureForecastConfig:
    """Seasonal period for the lag feature plus the boosting config."""

    period: int = 96
    train: learner.TrainConfig = learner.TrainConfig(
        n_trees=100, max_depth=3, learning_rate=0.3, min_samples_leaf=2, seed=0
    )


_FEATURE_NAMES = (
    "lag_1",
    "lag_period",
    "dow_mon",
    "dow_tue",
    "dow_wed",
    "dow_thu",
    "dow_fri",
    "dow_sat",
    "dow_sun",
    "rainfall_mm",
    "temp_max_c",
)


def feature_forecast(
    series: TimeSeries,
    exog: ExogFeatures,
    horizon: int,
    config: FeatureForecastConfig | None = None,
    origin: int | None = None,
) -> ForecastResult:
    """Boosted one-step-ahead forecaster iterated over the horizon.

    Trains on rows (lag-1, lag-period, day-of-week one-hot, rainfall, max
    temp) -> next value, then feeds its own predictions back as lags. Only
    ``series.values[:origin]`` is ever consulted (default: the whole
    series), so later values cannot leak into the forecast.
    """
    cfg = config or FeatureForecastConfig()
    n = len(series) if origin is None else origin
    if not 0 < n <= len(series):
        raise DomainError(f"origin must be in (0, {len(series)}], got {origin}")
    if horizon < 1:
        raise DomainError("horizon must be positive")
    period = cfg.period
    if n < 2 * period:
        raise InsufficientHistoryError(
            f"need at least {2 * period} observations for period {period}, have {n}"
        )
    if len(exog) < n + horizon:
        raise CoverageError(
            f"exogenous features cover {len(exog)} steps, need {n + horizon}"
        )
    for i in (0, n - 1):
        if exog.timestamps[i] != series.timestamps[i]:
            raise CoverageError("exogenous timestamps do not match the series")

    history = series.values[:n]

    def features_at(i: int, values: np.ndarray) -> np.ndarray:
        # values holds history followed by predictions already made
        return np.concatenate(
            [[values[i - 1], values[i - period]], exog.row(i)]
        )

    rows = np.vstack([features_at(i, history) for i in range(period, n)])
    targets = history[period:n].reshape(-1, 1)
    dataset = learner.Dataset(rows, targets, _FEATURE_NAMES, ("inflow",))
    model = learner.fit_gbt(dataset, cfg.train)

    extended = np.concatenate([history, np.zeros(horizon)])
    for h in range(horizon):
        i = n + h
        pred = float(model.predict(features_at(i, extended))[0])
        extended[i] = pred
    return ForecastResult(extended[n:], "feature_model")


def evaluate_forecast(
    actual: Sequence[float],
    predicted: Sequence[float],
    train_series: TimeSeries,
    period: int,
) -> AccuracyReport:
    """MAE, RMSE, and MASE against the in-sample one-season-lag naive."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.ndim != 1:
        raise DimensionError("actual and predicted must be 1-D and equal length")
    if period < 1:
        raise DomainError("period must be positive")
    err = a - p
    mae = float(np.abs(err).mean())
    rmse = float(np.sqrt((err**2).mean()))
    train = train_series.values
    if len(train) <= period:
        raise InsufficientHistoryError(
            f"training series must exceed one period ({period})"
        )
    naive_mae = float(np.abs(train[period:] - train[:-period]).mean())
    mase = mae / naive_mae if naive_mae > 0 else None
    return AccuracyReport(mae=mae, rmse=rmse, mase=mase)
