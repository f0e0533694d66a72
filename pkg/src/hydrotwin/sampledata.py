"""Deterministic synthetic plant and weather data.

Generates the bundled sample CSVs (committed under sample_data/) and the
per-episode trajectories written by the ``simulate`` CLI command. The plant
runs under a hysteresis policy while cycling through a fixed playlist of
operating points so the learner sees varied inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .config import ServiceConfig
from .datastore import HistorianRecord, WeatherRecord
from .scheduler import HysteresisPolicy
from .twin import (
    GroundTruthParams,
    OperatingPoint,
    PlantState,
    ReactorStatus,
    TankState,
    sample_observation,
    step_dynamics,
)

OP_PLAYLIST = (
    OperatingPoint(160.0, 0.14, 25.0),
    OperatingPoint(170.0, 0.18, 35.0),
    OperatingPoint(155.0, 0.12, 40.0),
    OperatingPoint(175.0, 0.20, 20.0),
    OperatingPoint(165.0, 0.16, 30.0),
    OperatingPoint(152.0, 0.19, 22.0),
    OperatingPoint(178.0, 0.13, 38.0),
)

OP_DWELL_STEPS = 8


def generate_weather(
    start_day: date, n_days: int, seed: int
) -> list[WeatherRecord]:
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_days):
        day = start_day + timedelta(days=i)
        wet = rng.random() < 0.35
        rain = float(rng.gamma(2.0, 4.0)) if wet else 0.0
        tmax = float(24.0 + 5.0 * np.sin(2 * np.pi * i / 14.0) + rng.normal(0, 1.5))
        tmin = tmax - float(rng.uniform(4.0, 10.0))
        records.append(WeatherRecord(day, round(rain, 1), round(tmax, 1), round(tmin, 1)))
    return records


@dataclass(frozen=True)
class SampleRun:
    historian: list[HistorianRecord]
    weather: list[WeatherRecord]
    levels: list[float]
    inflows_pct: list[float]


def generate_sample_run(
    config: ServiceConfig,
    history_days: int = 10,
    future_weather_days: int = 2,
    seed: int = 7,
) -> SampleRun:
    """Simulated operation under hysteresis with a rotating op point.

    Weather covers the history plus ``future_weather_days`` so planners can
    use known future covariates.
    """
    steps_per_day = (24 * 60) // config.step_minutes
    horizon = history_days * steps_per_day
    weather = generate_weather(
        config.time_origin.date(), history_days + future_weather_days, seed
    )
    rain_by_day = {w.date: w.rainfall_mm for w in weather}

    rng = np.random.default_rng(seed + 1)
    params = config.ground_truth
    policy = HysteresisPolicy(
        on_above_pct=config.target_level_pct + config.deadband_pct,
        off_below_pct=config.target_level_pct - config.deadband_pct,
    )
    state = PlantState(
        t_index=0,
        tank=TankState(config.initial_level_pct, config.capacity_m3),
        reactors=tuple(ReactorStatus(False, 0) for _ in config.reactors),
        op_point=OP_PLAYLIST[0],
    )
    statuses = [False] * len(config.reactors)
    deficit = [0] * len(config.reactors)

    historian: list[HistorianRecord] = []
    levels: list[float] = []
    inflows: list[float] = []
    for t in range(horizon):
        ts = config.time_origin + timedelta(minutes=config.step_minutes * t)
        day = ts.date()
        inflow = config.inflow.sample(
            rng, t, rainfall_mm=rain_by_day.get(day, 0.0), weekday=ts.weekday()
        )
        op = OP_PLAYLIST[(t // OP_DWELL_STEPS) % len(OP_PLAYLIST)]

        projected = state.tank.level_pct + inflow - sum(
            spec.rate_pct_per_step
            for spec, on in zip(config.reactors, statuses)
            if on
        )
        for r, spec in enumerate(config.reactors):
            if projected > policy.on_above_pct and not statuses[r] and deficit[r] == 0:
                statuses[r] = True
                deficit[r] = spec.min_up_steps
                projected -= spec.rate_pct_per_step
            elif projected < policy.off_below_pct and statuses[r] and deficit[r] == 0:
                statuses[r] = False
                deficit[r] = spec.min_down_steps
                projected += spec.rate_pct_per_step
        deficit = [max(0, d - 1) for d in deficit]

        step = step_dynamics(state, config.reactors, inflow, statuses, op_point=op)
        state = step.next_state
        levels.append(state.tank.level_pct)
        inflows.append(inflow)

        historian.append(HistorianRecord(ts, "inflow_m3", round(inflow * config.capacity_m3 / 100.0, 3)))
        historian.append(HistorianRecord(ts, "tank_level_pct", round(state.tank.level_pct, 3)))
        for r in range(len(config.reactors)):
            historian.append(
                HistorianRecord(ts, f"reactor{r + 1}_status", float(statuses[r]))
            )
        if any(statuses):
            energy, quality = sample_observation(op, params, rng)
            historian.append(HistorianRecord(ts, "temp_setpoint_c", op.temp_setpoint_c))
            historian.append(HistorianRecord(ts, "dry_solids_frac", op.dry_solids_frac))
            historian.append(HistorianRecord(ts, "cycle_minutes", op.cycle_minutes))
            historian.append(HistorianRecord(ts, "energy_kwh_m3", round(energy, 4)))
            historian.append(HistorianRecord(ts, "quality_index", round(quality, 4)))

    historian.sort(key=lambda rec: (rec.timestamp, rec.tag))
    return SampleRun(historian, weather, levels, inflows)
