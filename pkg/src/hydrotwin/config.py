"""Service and planner configuration.

One JSON document drives the whole stack (plant geometry, scheduler
weights, scenario grid, quality policy, forecaster, synthetic ground truth
and inflow process). ``HYDROTWIN_CONFIG`` points at an override file;
``HYDROTWIN_PORT`` overrides the port.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

from .datastore import parse_timestamp
from .engine import AxisSpec, PlannerConfig, QualityPolicy, ScenarioGrid
from .errors import ParseError
from .forecasting import FeatureForecastConfig
from .learner import TrainConfig
from .twin import (
    GroundTruthParams,
    InflowModel,
    OperatingPoint,
    PlantState,
    ReactorSpec,
    ReactorStatus,
    TankState,
    utc,
)

DEFAULT_PORT = 8080


@dataclass(frozen=True)
class ServiceConfig:
    time_origin: datetime = utc(2024, 3, 1)
    step_minutes: int = 15
    capacity_m3: float = 2000.0
    initial_level_pct: float = 60.0
    target_level_pct: float = 60.0
    reactors: tuple[ReactorSpec, ...] = (
        ReactorSpec(1, 6.0, 2, 2),
        ReactorSpec(2, 8.0, 2, 2),
        ReactorSpec(3, 10.0, 2, 2),
    )
    omega: float = 0.1
    horizon_steps: int = 16
    level_bounds: tuple[float, float] | None = None
    forecast_method: str = "seasonal_naive"
    forecast_period: int = 96
    forecast_window: int = 96
    feature_train: TrainConfig = TrainConfig(
        n_trees=100, max_depth=3, learning_rate=0.3, min_samples_leaf=2, seed=0
    )
    grid: ScenarioGrid = field(default_factory=ScenarioGrid)
    policy: QualityPolicy = field(default_factory=QualityPolicy)
    ground_truth: GroundTruthParams = GroundTruthParams(
        noise_sigma_energy=0.5, noise_sigma_quality=0.01
    )
    inflow: InflowModel = field(default_factory=InflowModel)
    tick_seed: int = 424242
    deadband_pct: float = 10.0
    default_op_point: OperatingPoint = OperatingPoint(165.0, 0.16, 30.0)
    model_path: str | None = None
    run_log_path: str | None = None
    ui_dir: str | None = None
    port: int = DEFAULT_PORT

    def planner_config(self, horizon: int | None = None, omega: float | None = None) -> PlannerConfig:
        return PlannerConfig(
            reactors=self.reactors,
            horizon_steps=horizon if horizon is not None else self.horizon_steps,
            target_level_pct=self.target_level_pct,
            omega=omega if omega is not None else self.omega,
            level_bounds=self.level_bounds,
            forecast_method=self.forecast_method,
            forecast_period=self.forecast_period,
            forecast_window=self.forecast_window,
            feature_forecast=FeatureForecastConfig(
                period=self.forecast_period, train=self.feature_train
            ),
        )

    def initial_plant_state(self) -> PlantState:
        return PlantState(
            t_index=0,
            tank=TankState(self.initial_level_pct, self.capacity_m3),
            reactors=tuple(ReactorStatus(False, 0) for _ in self.reactors),
            op_point=self.default_op_point,
        )


def _reactors_from_list(items: list) -> tuple[ReactorSpec, ...]:
    return tuple(
        ReactorSpec(
            id=int(r["id"]),
            rate_pct_per_step=float(r["rate_pct_per_step"]),
            min_up_steps=int(r.get("min_up_steps", 0)),
            min_down_steps=int(r.get("min_down_steps", 0)),
        )
        for r in items
    )


def config_from_dict(data: dict) -> ServiceConfig:
    cfg = ServiceConfig()
    simple = {}
    for key in (
        "step_minutes",
        "capacity_m3",
        "initial_level_pct",
        "target_level_pct",
        "omega",
        "horizon_steps",
        "forecast_method",
        "forecast_period",
        "forecast_window",
        "tick_seed",
        "deadband_pct",
        "model_path",
        "run_log_path",
        "ui_dir",
        "port",
    ):
        if key in data:
            simple[key] = data[key]
    if "time_origin" in data:
        simple["time_origin"] = parse_timestamp(data["time_origin"])
    if "reactors" in data:
        simple["reactors"] = _reactors_from_list(data["reactors"])
    if "level_bounds" in data and data["level_bounds"] is not None:
        simple["level_bounds"] = (
            float(data["level_bounds"][0]),
            float(data["level_bounds"][1]),
        )
    if "grid" in data:
        g = data["grid"]
        simple["grid"] = ScenarioGrid(
            temp=AxisSpec(*[float(v) for v in g["temp"]]),
            dry_solids=AxisSpec(*[float(v) for v in g["dry_solids"]]),
            cycle=AxisSpec(*[float(v) for v in g["cycle"]]),
            cap=int(g.get("cap", 10_000)),
        )
    if "policy" in data:
        simple["policy"] = QualityPolicy(
            q_min=float(data["policy"].get("q_min", 0.9)),
            margin=float(data["policy"].get("margin", 0.0)),
        )
    if "ground_truth" in data:
        simple["ground_truth"] = GroundTruthParams(**data["ground_truth"])
    if "inflow" in data:
        simple["inflow"] = InflowModel(**data["inflow"])
    if "feature_train" in data:
        simple["feature_train"] = TrainConfig(**data["feature_train"])
    if "default_op_point" in data:
        p = data["default_op_point"]
        simple["default_op_point"] = OperatingPoint(
            float(p["temp_setpoint_c"]),
            float(p["dry_solids_frac"]),
            float(p["cycle_minutes"]),
        )
    return replace(cfg, **simple)


def load_config(path: str | Path | None = None) -> ServiceConfig:
    """Defaults, overridden by an explicit path or HYDROTWIN_CONFIG, then
    HYDROTWIN_PORT."""
    env_path = os.environ.get("HYDROTWIN_CONFIG")
    chosen = path or env_path
    if chosen:
        try:
            data = json.loads(Path(chosen).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"config file {chosen}: {exc}") from exc
        config = config_from_dict(data)
    else:
        config = ServiceConfig()
    env_port = os.environ.get("HYDROTWIN_PORT")
    if env_port:
        config = replace(config, port=int(env_port))
    return config
