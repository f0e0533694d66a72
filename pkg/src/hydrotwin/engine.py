"""Scenario enumeration, operating-point selection, and planning.

The schedule is computed first (throughput priority), then candidate
operating scenarios consistent with it are enumerated on a lattice and
scored by the regression model; the cheapest quality-feasible candidate is
selected (quality before cost), falling back to the highest-quality point
with a risk flag when nothing clears the threshold. Also houses the
closed-loop comparison of the planned policy against the hysteresis
baseline.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import learner
from .datastore import canonical_json, format_timestamp, model_to_payload
from .errors import DimensionError, DomainError, SizeError, UntrainedModelError
from .forecasting import (
    ExogFeatures,
    FeatureForecastConfig,
    TimeSeries,
    feature_forecast,
    moving_average,
    seasonal_naive,
)
from .scheduler import (
    HysteresisPolicy,
    Schedule,
    ScheduleProblem,
    ScheduleSolution,
    hysteresis_baseline,
    levels,
    objective_value,
    solve_exact,
)
from .twin import (
    CYCLE_BOUNDS_MIN,
    DRY_SOLIDS_BOUNDS,
    TEMP_BOUNDS_C,
    GroundTruthParams,
    InflowModel,
    OperatingPoint,
    PlantState,
    ReactorSpec,
    ReactorStatus,
    TankState,
    TimeGrid,
    simulate_episode,
)

_GRID_EPS = 1e-9


@dataclass(frozen=True)
class AxisSpec:
    min: float
    max: float
    step: float

    def __post_init__(self) -> None:
        if self.min > self.max:
            raise DomainError(f"axis min {self.min} > max {self.max}")
        if self.step <= 0:
            raise DomainError(f"axis step must be positive, got {self.step}")

    def points(self) -> list[float]:
        count = int((self.max - self.min) / self.step + _GRID_EPS) + 1
        return [self.min + i * self.step for i in range(count)]


@dataclass(frozen=True)
class ScenarioGrid:
    temp: AxisSpec = AxisSpec(TEMP_BOUNDS_C[0], TEMP_BOUNDS_C[1], 2.0)
    dry_solids: AxisSpec = AxisSpec(DRY_SOLIDS_BOUNDS[0], DRY_SOLIDS_BOUNDS[1], 0.01)
    cycle: AxisSpec = AxisSpec(CYCLE_BOUNDS_MIN[0], CYCLE_BOUNDS_MIN[1], 5.0)
    cap: int = 10_000

    def cardinality(self) -> int:
        return (
            len(self.temp.points())
            * len(self.dry_solids.points())
            * len(self.cycle.points())
        )


@dataclass(frozen=True)
class QualityPolicy:
    q_min: float = 0.9
    margin: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.q_min < 1:
            raise DomainError(f"q_min must be in (0, 1), got {self.q_min}")
        if self.margin < 0:
            raise DomainError("margin must be non-negative")

    @property
    def threshold(self) -> float:
        return self.q_min + self.margin


@dataclass(frozen=True)
class CandidateScenario:
    op_point: OperatingPoint
    predicted_energy: float
    predicted_quality: float
    feasible: bool


@dataclass(frozen=True)
class SelectionResult:
    selected: CandidateScenario
    ranked: tuple[CandidateScenario, ...]
    quality_risk: bool


def enumerate_scenarios(grid: ScenarioGrid) -> list[OperatingPoint]:
    """Cartesian lattice ordered lexicographically (temp, dry solids, cycle)."""
    if grid.cardinality() > grid.cap:
        raise SizeError(
            f"scenario grid cardinality {grid.cardinality()} exceeds cap {grid.cap}"
        )
    return [
        OperatingPoint(t, ds, c)
        for t in grid.temp.points()
        for ds in grid.dry_solids.points()
        for c in grid.cycle.points()
    ]


def _target_columns(model) -> tuple[int, int]:
    names = getattr(model, "target_names", None)
    if names and "energy_kwh_m3" in names and "quality_index" in names:
        return names.index("energy_kwh_m3"), names.index("quality_index")
    return 0, 1


def select_operating_point(
    model, grid: ScenarioGrid, policy: QualityPolicy
) -> SelectionResult:
    """Cheapest quality-feasible lattice point under the model's predictions.

    Energy ties break to lower temperature, then lower cycle time, then
    lower dry solids. With no feasible candidate, returns the predicted
    quality maximizer and flags quality risk.
    """
    points = enumerate_scenarios(grid)
    if not points:
        raise SizeError("empty scenario grid")
    features = np.array([[p.temp_setpoint_c, p.dry_solids_frac, p.cycle_minutes] for p in points])
    pred = np.atleast_2d(model.predict(features))
    if pred.shape[0] != len(points) or pred.shape[1] < 2:
        raise DimensionError("model predictions must be (n_points, 2)")
    e_col, q_col = _target_columns(model)

    candidates = [
        CandidateScenario(
            op_point=p,
            predicted_energy=float(pred[i, e_col]),
            predicted_quality=float(pred[i, q_col]),
            feasible=bool(pred[i, q_col] >= policy.threshold),
        )
        for i, p in enumerate(points)
    ]

    def energy_key(c: CandidateScenario):
        return (
            c.predicted_energy,
            c.op_point.temp_setpoint_c,
            c.op_point.cycle_minutes,
            c.op_point.dry_solids_frac,
        )

    feasible = [c for c in candidates if c.feasible]
    infeasible = [c for c in candidates if not c.feasible]
    feasible.sort(key=energy_key)
    infeasible.sort(
        key=lambda c: (
            -c.predicted_quality,
            c.op_point.temp_setpoint_c,
            c.op_point.dry_solids_frac,
            c.op_point.cycle_minutes,
        )
    )
    if feasible:
        return SelectionResult(feasible[0], tuple(feasible + infeasible), False)
    # fallback: highest predicted quality; grid order breaks exact ties
    best = candidates[0]
    for c in candidates[1:]:
        if c.predicted_quality > best.predicted_quality:
            best = c
    return SelectionResult(best, tuple(infeasible), True)


@dataclass(frozen=True)
class RecommendationFlags:
    quality_risk: bool
    not_proven_optimal: bool
    level_bound_violation: bool


@dataclass(frozen=True)
class Recommendation:
    id: str
    created_at_iso: str
    schedule: Schedule
    op_points: tuple[OperatingPoint | None, ...]
    predicted_total_energy_kwh: float
    min_predicted_quality: float | None
    flags: RecommendationFlags
    input_hash: str
    target_level_pct: float
    inflow_forecast_pct: tuple[float, ...]
    planned_levels_pct: tuple[float, ...]
    objective: float
    deviation_sum: float
    switch_count: int
    selected_candidate: CandidateScenario | None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "created_at": self.created_at_iso,
            "schedule": self.schedule.to_lists(),
            "op_points": [
                None
                if op is None
                else {
                    "temp_setpoint_c": op.temp_setpoint_c,
                    "dry_solids_frac": op.dry_solids_frac,
                    "cycle_minutes": op.cycle_minutes,
                }
                for op in self.op_points
            ],
            "predicted_total_energy_kwh": self.predicted_total_energy_kwh,
            "min_predicted_quality": self.min_predicted_quality,
            "flags": {
                "quality_risk": self.flags.quality_risk,
                "not_proven_optimal": self.flags.not_proven_optimal,
                "level_bound_violation": self.flags.level_bound_violation,
            },
            "input_hash": self.input_hash,
            "target_level_pct": self.target_level_pct,
            "inflow_forecast_pct": list(self.inflow_forecast_pct),
            "planned_levels_pct": list(self.planned_levels_pct),
            "objective": self.objective,
            "deviation_sum": self.deviation_sum,
            "switch_count": self.switch_count,
            "selected_candidate": None
            if self.selected_candidate is None
            else {
                "temp_setpoint_c": self.selected_candidate.op_point.temp_setpoint_c,
                "dry_solids_frac": self.selected_candidate.op_point.dry_solids_frac,
                "cycle_minutes": self.selected_candidate.op_point.cycle_minutes,
                "predicted_energy": self.selected_candidate.predicted_energy,
                "predicted_quality": self.selected_candidate.predicted_quality,
                "feasible": self.selected_candidate.feasible,
            },
        }


@dataclass(frozen=True)
class PlannerConfig:
    reactors: tuple[ReactorSpec, ...]
    horizon_steps: int
    target_level_pct: float
    omega: float = 0.1
    level_bounds: tuple[float, float] | None = None
    forecast_method: str = "feature_model"
    forecast_period: int = 96
    forecast_window: int = 96
    feature_forecast: FeatureForecastConfig = field(default_factory=FeatureForecastConfig)
    node_budget: int | None = None
    max_variables: int = 96

    def __post_init__(self) -> None:
        if self.horizon_steps < 1:
            raise DomainError("horizon_steps must be >= 1")
        if self.forecast_method not in ("seasonal_naive", "moving_average", "feature_model"):
            raise DomainError(f"unknown forecast method {self.forecast_method!r}")


def forecast_inflows(
    history: TimeSeries,
    exog: ExogFeatures | None,
    horizon: int,
    config: PlannerConfig,
) -> np.ndarray:
    if config.forecast_method == "seasonal_naive":
        result = seasonal_naive(history, config.forecast_period, horizon)
    elif config.forecast_method == "moving_average":
        result = moving_average(history, config.forecast_window, horizon)
    else:
        if exog is None:
            raise DomainError("feature_model forecasting requires exogenous features")
        result = feature_forecast(history, exog, horizon, config.feature_forecast)
    # the scheduler rejects negative inflows; regressors cannot produce them
    # from non-negative targets but float noise gets clamped defensively
    return np.maximum(result.values, 0.0)


def plan(
    state: PlantState,
    history: TimeSeries,
    exog: ExogFeatures | None,
    model,
    config: PlannerConfig,
    grid: ScenarioGrid,
    policy: QualityPolicy,
) -> Recommendation:
    """Forecast, schedule, then pick operating points for the active steps."""
    if model is None:
        raise UntrainedModelError("plan requires a trained model")
    if len(state.reactors) != len(config.reactors):
        raise DimensionError("plant state and config disagree on reactor count")

    inflows = forecast_inflows(history, exog, config.horizon_steps, config)
    plan_grid = TimeGrid(
        start=history.future_timestamps(1)[0],
        step_minutes=history.step_minutes,
        horizon_steps=config.horizon_steps,
    )
    problem = ScheduleProblem(
        grid=plan_grid,
        reactors=config.reactors,
        initial_status=tuple(r.running for r in state.reactors),
        initial_level_pct=state.tank.level_pct,
        target_level_pct=config.target_level_pct,
        inflow_forecast_pct=tuple(float(v) for v in inflows),
        omega=config.omega,
        level_bounds=config.level_bounds,
    )
    solution = solve_exact(
        problem, node_budget=config.node_budget, max_variables=config.max_variables
    )

    active = [
        any(solution.schedule.x[r][t] for r in range(len(config.reactors)))
        for t in range(config.horizon_steps)
    ]
    selection: SelectionResult | None = None
    if any(active):
        selection = select_operating_point(model, grid, policy)
    op_points = tuple(
        selection.selected.op_point if (on and selection) else None for on in active
    )

    capacity = state.tank.capacity_m3
    total_energy = 0.0
    for t in range(config.horizon_steps):
        if not active[t]:
            continue
        volume = sum(
            spec.rate_pct_per_step
            for spec, row in zip(config.reactors, solution.schedule.x)
            if row[t]
        ) * capacity / 100.0
        total_energy += volume * selection.selected.predicted_energy

    planned = levels(problem, solution.schedule)
    bound_violation = any(v < 0.0 - 1e-9 or v > 100.0 + 1e-9 for v in planned)

    digest_input = {
        "state": {
            "t_index": state.t_index,
            "level_pct": state.tank.level_pct,
            "capacity_m3": state.tank.capacity_m3,
            "reactors": [[int(r.running), r.steps_in_state] for r in state.reactors],
        },
        "history": {
            "start": format_timestamp(history.timestamps[0]),
            "step_minutes": history.step_minutes,
            "values": [float(v) for v in history.values],
        },
        "exog": None
        if exog is None
        else {
            "rainfall_mm": [float(v) for v in exog.rainfall_mm],
            "temp_max_c": [float(v) for v in exog.temp_max_c],
        },
        "config": {
            "horizon_steps": config.horizon_steps,
            "target_level_pct": config.target_level_pct,
            "omega": config.omega,
            "level_bounds": list(config.level_bounds) if config.level_bounds else None,
            "forecast_method": config.forecast_method,
            "forecast_period": config.forecast_period,
            "reactors": [
                [spec.id, spec.rate_pct_per_step, spec.min_up_steps, spec.min_down_steps]
                for spec in config.reactors
            ],
        },
        "grid": {
            "temp": [grid.temp.min, grid.temp.max, grid.temp.step],
            "dry_solids": [grid.dry_solids.min, grid.dry_solids.max, grid.dry_solids.step],
            "cycle": [grid.cycle.min, grid.cycle.max, grid.cycle.step],
        },
        "policy": {"q_min": policy.q_min, "margin": policy.margin},
        "model": _model_fingerprint(model),
    }
    input_hash = hashlib.sha256(canonical_json(digest_input).encode()).hexdigest()

    return Recommendation(
        id=f"rec-{input_hash[:12]}",
        created_at_iso=format_timestamp(plan_grid.start),
        schedule=solution.schedule,
        op_points=op_points,
        predicted_total_energy_kwh=total_energy,
        min_predicted_quality=selection.selected.predicted_quality if selection else None,
        flags=RecommendationFlags(
            quality_risk=selection.quality_risk if selection else False,
            not_proven_optimal=not solution.optimal,
            level_bound_violation=bound_violation,
        ),
        input_hash=input_hash,
        target_level_pct=config.target_level_pct,
        inflow_forecast_pct=tuple(float(v) for v in inflows),
        planned_levels_pct=tuple(planned),
        objective=solution.objective,
        deviation_sum=solution.deviation_sum,
        switch_count=solution.switch_count,
        selected_candidate=selection.selected if selection else None,
    )


def _model_fingerprint(model) -> str:
    if isinstance(model, (learner.GBTModel, learner.KnnModel)):
        kind, payload = model_to_payload(model)
    else:
        # e.g. the ground-truth oracle: fingerprint its repr
        kind, payload = type(model).__name__, {"repr": repr(getattr(model, "params", model))}
    return hashlib.sha256(canonical_json({"kind": kind, "payload": payload}).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Closed-loop comparison (Figure-1 style)


@dataclass(frozen=True)
class EpisodeMetrics:
    seed: int
    rms_deviation_plan: float
    rms_deviation_baseline: float
    objective_plan: float
    objective_baseline: float
    switches_plan: int
    switches_baseline: int
    energy_plan_kwh: float
    energy_baseline_kwh: float
    min_quality_plan: float | None
    min_quality_baseline: float | None


@dataclass(frozen=True)
class ClosedLoopReport:
    episodes: tuple[EpisodeMetrics, ...]
    aggregate_rms_plan: float
    aggregate_rms_baseline: float
    total_energy_plan_kwh: float
    total_energy_baseline_kwh: float
    total_switches_plan: int
    total_switches_baseline: int

    def to_dict(self) -> dict:
        return {
            "episodes": [
                {
                    "seed": e.seed,
                    "rms_deviation_plan": e.rms_deviation_plan,
                    "rms_deviation_baseline": e.rms_deviation_baseline,
                    "objective_plan": e.objective_plan,
                    "objective_baseline": e.objective_baseline,
                    "switches_plan": e.switches_plan,
                    "switches_baseline": e.switches_baseline,
                    "energy_plan_kwh": e.energy_plan_kwh,
                    "energy_baseline_kwh": e.energy_baseline_kwh,
                    "min_quality_plan": e.min_quality_plan,
                    "min_quality_baseline": e.min_quality_baseline,
                }
                for e in self.episodes
            ],
            "aggregate_rms_plan": self.aggregate_rms_plan,
            "aggregate_rms_baseline": self.aggregate_rms_baseline,
            "total_energy_plan_kwh": self.total_energy_plan_kwh,
            "total_energy_baseline_kwh": self.total_energy_baseline_kwh,
            "total_switches_plan": self.total_switches_plan,
            "total_switches_baseline": self.total_switches_baseline,
        }


@dataclass(frozen=True)
class EpisodeSpec:
    n_episodes: int = 20
    horizon_steps: int = 96
    step_minutes: int = 15
    base_seed: int = 2024
    initial_level_pct: float = 60.0
    target_level_pct: float = 60.0
    capacity_m3: float = 2000.0
    omega: float = 0.1
    reactors: tuple[ReactorSpec, ...] = (
        ReactorSpec(1, 6.0, 2, 2),
        ReactorSpec(2, 8.0, 2, 2),
        ReactorSpec(3, 10.0, 2, 2),
    )
    inflow: InflowModel = field(default_factory=InflowModel)
    deadband_pct: float = 10.0
    start: TimeGrid | None = None


def evaluate_closed_loop(
    spec: EpisodeSpec,
    model,
    grid: ScenarioGrid,
    policy: QualityPolicy,
    params: GroundTruthParams,
) -> ClosedLoopReport:
    """Replay the exact-forecast MIP policy and the hysteresis baseline on
    identical seeded inflow realizations and compare tracking, switching,
    energy and realized quality.

    Forecasts equal realized inflows here, so the MIP's ex-post objective is
    provably no worse than the baseline's on every episode.
    """
    if spec.n_episodes < 1:
        raise DomainError("need at least one episode")
    from .twin import utc  # local import keeps module top uncluttered

    start_grid = spec.start or TimeGrid(utc(2024, 3, 1), spec.step_minutes, spec.horizon_steps)
    selection = select_operating_point(model, grid, policy)
    op = selection.selected.op_point

    episodes: list[EpisodeMetrics] = []
    sq_plan = 0.0
    sq_base = 0.0
    n_steps_total = 0
    for e in range(spec.n_episodes):
        seed = spec.base_seed + e
        inflows = spec.inflow.episode(seed=seed, horizon=spec.horizon_steps)
        problem = ScheduleProblem(
            grid=start_grid,
            reactors=spec.reactors,
            initial_status=tuple(False for _ in spec.reactors),
            initial_level_pct=spec.initial_level_pct,
            target_level_pct=spec.target_level_pct,
            inflow_forecast_pct=tuple(float(v) for v in inflows),
            omega=spec.omega,
        )
        planned = solve_exact(
            problem, max_variables=len(spec.reactors) * spec.horizon_steps
        )
        baseline = hysteresis_baseline(
            problem,
            HysteresisPolicy(
                on_above_pct=spec.target_level_pct + spec.deadband_pct,
                off_below_pct=spec.target_level_pct - spec.deadband_pct,
            ),
        )
        base_solution = objective_value(problem, baseline)

        initial_state = PlantState(
            t_index=0,
            tank=TankState(spec.initial_level_pct, spec.capacity_m3),
            reactors=tuple(ReactorStatus(False, 0) for _ in spec.reactors),
            op_point=op,
        )

        metrics = {}
        for label, schedule in (("plan", planned.schedule), ("baseline", baseline)):
            ops = [
                op if any(schedule.x[r][t] for r in range(len(spec.reactors))) else None
                for t in range(spec.horizon_steps)
            ]
            traj = simulate_episode(
                initial_state, spec.reactors, inflows, schedule.x, ops, params
            )
            devs = np.array(traj.levels) - spec.target_level_pct
            qualities = [q for q in traj.quality if q is not None]
            metrics[label] = {
                "rms": float(np.sqrt(np.mean(devs**2))),
                "sq": float((devs**2).sum()),
                "energy": traj.total_energy_kwh,
                "min_q": min(qualities) if qualities else None,
            }

        episodes.append(
            EpisodeMetrics(
                seed=seed,
                rms_deviation_plan=metrics["plan"]["rms"],
                rms_deviation_baseline=metrics["baseline"]["rms"],
                objective_plan=planned.objective,
                objective_baseline=base_solution.objective,
                switches_plan=planned.switch_count,
                switches_baseline=base_solution.switch_count,
                energy_plan_kwh=metrics["plan"]["energy"],
                energy_baseline_kwh=metrics["baseline"]["energy"],
                min_quality_plan=metrics["plan"]["min_q"],
                min_quality_baseline=metrics["baseline"]["min_q"],
            )
        )
        sq_plan += metrics["plan"]["sq"]
        sq_base += metrics["baseline"]["sq"]
        n_steps_total += spec.horizon_steps

    return ClosedLoopReport(
        episodes=tuple(episodes),
        aggregate_rms_plan=float(np.sqrt(sq_plan / n_steps_total)),
        aggregate_rms_baseline=float(np.sqrt(sq_base / n_steps_total)),
        total_energy_plan_kwh=sum(e.energy_plan_kwh for e in episodes),
        total_energy_baseline_kwh=sum(e.energy_baseline_kwh for e in episodes),
        total_switches_plan=sum(e.switches_plan for e in episodes),
        total_switches_baseline=sum(e.switches_baseline for e in episodes),
    )
