"""Deterministic plant digital twin.

Storage-tank level dynamics driven by reactor throughput, plus a synthetic
nonlinear ground-truth model of specific energy and biosolid quality used to
generate training data and to score closed-loop runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError

TEMP_BOUNDS_C = (150.0, 180.0)
DRY_SOLIDS_BOUNDS = (0.12, 0.20)
CYCLE_BOUNDS_MIN = (20.0, 40.0)

_BOUND_EPS = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform planning/alignment grid of ``horizon_steps`` steps."""

    start: datetime
    step_minutes: int
    horizon_steps: int

    def __post_init__(self) -> None:
        if self.start.tzinfo is None:
            raise DomainError("TimeGrid.start must be timezone-aware UTC")
        if self.start.utcoffset().total_seconds() != 0:
            raise DomainError("TimeGrid.start must be UTC")
        if self.step_minutes < 1:
            raise DomainError(f"step_minutes must be >= 1, got {self.step_minutes}")
        if self.horizon_steps < 1:
            raise DomainError(f"horizon_steps must be >= 1, got {self.horizon_steps}")

    def step_time(self, index: int) -> datetime:
        from datetime import timedelta

        return self.start + timedelta(minutes=self.step_minutes * index)


@dataclass(frozen=True)
class TankState:
    level_pct: float
    capacity_m3: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.level_pct <= 100.0:
            raise DomainError(f"level_pct must be in [0, 100], got {self.level_pct}")
        if self.capacity_m3 <= 0:
            raise DomainError(f"capacity_m3 must be positive, got {self.capacity_m3}")


@dataclass(frozen=True)
class ReactorSpec:
    id: int
    rate_pct_per_step: float
    min_up_steps: int = 0
    min_down_steps: int = 0

    def __post_init__(self) -> None:
        if self.rate_pct_per_step <= 0:
            raise DomainError("rate_pct_per_step must be positive")
        if self.min_up_steps < 0 or self.min_down_steps < 0:
            raise DomainError("min up/down steps must be non-negative")


def validate_reactor_specs(reactors: Sequence[ReactorSpec]) -> None:
    """Reactor ids must be unique and contiguous from 1."""
    ids = [r.id for r in reactors]
    if ids != list(range(1, len(reactors) + 1)):
        raise DomainError(f"reactor ids must be contiguous from 1, got {ids}")


@dataclass(frozen=True)
class ReactorStatus:
    running: bool
    steps_in_state: int = 0

    def __post_init__(self) -> None:
        if self.steps_in_state < 0:
            raise DomainError("steps_in_state must be non-negative")


@dataclass(frozen=True)
class OperatingPoint:
    """Continuous reactor parameters over which scenarios are enumerated."""

    temp_setpoint_c: float
    dry_solids_frac: float
    cycle_minutes: float

    def __post_init__(self) -> None:
        _check_bounds("temp_setpoint_c", self.temp_setpoint_c, TEMP_BOUNDS_C)
        _check_bounds("dry_solids_frac", self.dry_solids_frac, DRY_SOLIDS_BOUNDS)
        _check_bounds("cycle_minutes", self.cycle_minutes, CYCLE_BOUNDS_MIN)

    def as_row(self) -> np.ndarray:
        return np.array([self.temp_setpoint_c, self.dry_solids_frac, self.cycle_minutes])


def _check_bounds(name: str, value: float, bounds: tuple[float, float]) -> None:
    lo, hi = bounds
    if not math.isfinite(value) or value < lo - _BOUND_EPS or value > hi + _BOUND_EPS:
        raise DomainError(f"{name}={value} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class PlantState:
    t_index: int
    tank: TankState
    reactors: tuple[ReactorStatus, ...]
    op_point: OperatingPoint

    def __post_init__(self) -> None:
        if not self.reactors:
            raise DomainError("at least one reactor required")


@dataclass(frozen=True)
class GroundTruthParams:
    """Coefficients of the synthetic energy/quality surrogate."""

    e0: float = 35.0
    a_temp: float = 0.9
    a_cycle: float = 0.2
    a_dry_solids: float = -150.0
    a_interaction: float = 4.0
    b_temp: float = 0.25
    b_cycle: float = 0.1
    noise_sigma_energy: float = 0.0
    noise_sigma_quality: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_sigma_energy < 0 or self.noise_sigma_quality < 0:
            raise DomainError("noise sigmas must be non-negative")


@dataclass(frozen=True)
class StepResult:
    next_state: PlantState
    overflow: bool
    underflow: bool


def step_dynamics(
    state: PlantState,
    reactors: Sequence[ReactorSpec],
    inflow_pct: float,
    decisions: Sequence[bool],
    op_point: OperatingPoint | None = None,
) -> StepResult:
    """Advance the tank one step under the given reactor on/off decisions.

    The level update is ``level + inflow - sum(rate of running reactors)``
    clamped to [0, 100]; overflow/underflow flags record a pre-clamp
    excursion. Reactor specs are passed explicitly so the twin holds no
    hidden configuration.
    """
    if len(decisions) != len(state.reactors) or len(reactors) != len(state.reactors):
        raise DimensionError(
            f"decision vector length {len(decisions)} != reactor count {len(state.reactors)}"
        )
    if inflow_pct < 0:
        raise DomainError(f"inflow_pct must be non-negative, got {inflow_pct}")

    throughput = sum(
        spec.rate_pct_per_step for spec, on in zip(reactors, decisions) if on
    )
    raw = state.tank.level_pct + inflow_pct - throughput
    overflow = raw > 100.0
    underflow = raw < 0.0
    level = min(100.0, max(0.0, raw))

    statuses = []
    for status, on in zip(state.reactors, decisions):
        on = bool(on)
        if on == status.running:
            statuses.append(ReactorStatus(on, status.steps_in_state + 1))
        else:
            statuses.append(ReactorStatus(on, 1))

    next_state = PlantState(
        t_index=state.t_index + 1,
        tank=TankState(level, state.tank.capacity_m3),
        reactors=tuple(statuses),
        op_point=op_point if op_point is not None else state.op_point,
    )
    return StepResult(next_state=next_state, overflow=overflow, underflow=underflow)


def true_energy(op: OperatingPoint, params: GroundTruthParams) -> float:
    """Specific energy (kWh per m3) of the synthetic ground truth."""
    t = op.temp_setpoint_c
    ds = op.dry_solids_frac
    c = op.cycle_minutes
    return (
        params.e0
        + params.a_temp * (t - 150.0)
        + params.a_cycle * (c - 20.0)
        + params.a_dry_solids * (ds - 0.12)
        + params.a_interaction * (t - 165.0) * (ds - 0.16)
    )


def true_quality(op: OperatingPoint, params: GroundTruthParams) -> float:
    """Quality index in (0, 1); logistic in temperature and cycle time."""
    arg = params.b_temp * (op.temp_setpoint_c - 160.0) + params.b_cycle * (
        op.cycle_minutes - 25.0
    )
    return 1.0 / (1.0 + math.exp(-arg))


def sample_observation(
    op: OperatingPoint, params: GroundTruthParams, rng: np.random.Generator
) -> tuple[float, float]:
    """One noisy (energy, quality) observation; deterministic given the rng state."""
    energy = true_energy(op, params) + (
        rng.normal(0.0, params.noise_sigma_energy) if params.noise_sigma_energy > 0 else 0.0
    )
    quality = true_quality(op, params) + (
        rng.normal(0.0, params.noise_sigma_quality) if params.noise_sigma_quality > 0 else 0.0
    )
    return energy, min(1.0, max(0.0, quality))


@dataclass(frozen=True)
class EpisodeTrajectory:
    """Closed-loop replay: per-step results plus realized energy/quality."""

    results: tuple[StepResult, ...]
    energy_kwh: tuple[float, ...]
    quality: tuple[float | None, ...]

    @property
    def levels(self) -> tuple[float, ...]:
        return tuple(r.next_state.tank.level_pct for r in self.results)

    @property
    def total_energy_kwh(self) -> float:
        return sum(self.energy_kwh)


def simulate_episode(
    initial: PlantState,
    reactors: Sequence[ReactorSpec],
    inflows_pct: Sequence[float],
    schedule_x: Sequence[Sequence[bool]],
    op_points: Sequence[OperatingPoint | None],
    params: GroundTruthParams,
) -> EpisodeTrajectory:
    """Replay a schedule against realized inflows.

    ``schedule_x`` is indexed [reactor][step]. Realized energy at step t is
    the volume processed (rate pct of capacity) times the ground-truth
    specific energy of that step's operating point; all-OFF steps contribute
    zero energy and carry no quality reading.
    """
    horizon = len(inflows_pct)
    if len(op_points) != horizon:
        raise DimensionError(f"op_points length {len(op_points)} != horizon {horizon}")
    if len(schedule_x) != len(reactors) or any(len(row) != horizon for row in schedule_x):
        raise DimensionError("schedule does not cover reactors x horizon")

    state = initial
    results: list[StepResult] = []
    energy: list[float] = []
    quality: list[float | None] = []
    capacity = initial.tank.capacity_m3
    for t in range(horizon):
        decisions = [bool(schedule_x[r][t]) for r in range(len(reactors))]
        op = op_points[t]
        if any(decisions):
            if op is None:
                raise DimensionError(f"step {t} has a reactor ON but no operating point")
            volume_m3 = sum(
                spec.rate_pct_per_step for spec, on in zip(reactors, decisions) if on
            ) * capacity / 100.0
            energy.append(volume_m3 * true_energy(op, params))
            quality.append(true_quality(op, params))
        else:
            energy.append(0.0)
            quality.append(None)
        step = step_dynamics(state, reactors, inflows_pct[t], decisions, op_point=op)
        results.append(step)
        state = step.next_state
    return EpisodeTrajectory(tuple(results), tuple(energy), tuple(quality))


class GroundTruthModel:
    """Oracle predictor with the same predict() surface as the learners.

    Maps rows (temperature, dry solids, cycle minutes) to noise-free
    (energy, quality). Used as the reference model in selection tests and
    available through the CLI for oracle-mode planning.
    """

    target_names = ("energy_kwh_m3", "quality_index")

    def __init__(self, params: GroundTruthParams | None = None):
        self.params = params or GroundTruthParams()

    def predict(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 1
        rows = np.atleast_2d(x)
        if rows.shape[1] != 3:
            raise DimensionError(f"expected 3 features, got {rows.shape[1]}")
        out = np.empty((rows.shape[0], 2))
        for i, (t, ds, c) in enumerate(rows):
            op = OperatingPoint(float(t), float(ds), float(c))
            out[i, 0] = true_energy(op, self.params)
            out[i, 1] = true_quality(op, self.params)
        return out[0] if single else out


@dataclass(frozen=True)
class InflowModel:
    """Seeded synthetic inflow process (percent of capacity per step).

    Daily sinusoid on top of a base rate, optional rainfall boost, weekday
    damping at weekends, gaussian noise, clamped non-negative.
    """

    base_pct: float = 5.0
    daily_amplitude_pct: float = 2.5
    rain_boost_per_mm: float = 0.05
    weekend_factor: float = 0.85
    noise_sigma: float = 0.4
    steps_per_day: int = 96

    def sample(
        self,
        rng: np.random.Generator,
        t_index: int,
        rainfall_mm: float = 0.0,
        weekday: int = 0,
    ) -> float:
        phase = 2.0 * math.pi * (t_index % self.steps_per_day) / self.steps_per_day
        value = self.base_pct + self.daily_amplitude_pct * math.sin(phase)
        value += self.rain_boost_per_mm * rainfall_mm
        if weekday >= 5:
            value *= self.weekend_factor
        value += rng.normal(0.0, self.noise_sigma) if self.noise_sigma > 0 else 0.0
        return max(0.0, value)

    def episode(
        self, seed: int, horizon: int, rainfall_mm: Sequence[float] | None = None
    ) -> np.ndarray:
        rng = np.random.default_rng(seed)
        rain = rainfall_mm if rainfall_mm is not None else [0.0] * horizon
        if len(rain) < horizon:
            raise DimensionError("rainfall series shorter than horizon")
        day = lambda t: (t // self.steps_per_day) % 7
        return np.array(
            [self.sample(rng, t, rain[t], day(t)) for t in range(horizon)]
        )


def utc(year: int, month: int, day: int, hour: int = 0, minute: int = 0) -> datetime:
    """Convenience constructor for UTC instants."""
    return datetime(year, month, day, hour, minute, tzinfo=timezone.utc)
