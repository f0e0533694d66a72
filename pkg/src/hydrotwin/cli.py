"""Command-line workflows: serve, simulate, train, plan, evaluate, ingest.

Machine-readable output is JSON on stdout; diagnostics go to stderr with a
nonzero exit code.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from datetime import timedelta
from pathlib import Path

import click
import numpy as np

from . import datastore, engine, learner, sampledata
from .config import ServiceConfig, load_config
from .errors import HydrotwinError, ParseError
from .forecasting import TimeSeries
from .scheduler import HysteresisPolicy
from .twin import (
    GroundTruthModel,
    PlantState,
    ReactorStatus,
    TankState,
    TimeGrid,
    sample_observation,
    step_dynamics,
)


def _load_service_config(path: str | None) -> ServiceConfig:
    try:
        return load_config(path)
    except (OSError, HydrotwinError) as exc:
        raise click.ClickException(f"cannot load config: {exc}") from exc


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, sort_keys=True, indent=2))


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise click.ClickException(str(exc)) from exc


def _aligned_from_historian(text: str, config: ServiceConfig) -> datastore.AlignedData:
    records, report = datastore.parse_historian_csv(text)
    if report.errors:
        click.echo(
            f"warning: {len(report.errors)} malformed historian rows skipped",
            err=True,
        )
    if not records:
        raise click.ClickException("historian file contains no valid rows")
    step = timedelta(minutes=config.step_minutes)
    horizon = max(
        int((rec.timestamp - config.time_origin) / step) for rec in records
    ) + 1
    if horizon < 1:
        raise click.ClickException("historian data predates the configured time origin")
    grid = TimeGrid(config.time_origin, config.step_minutes, horizon)
    return datastore.align_to_grid(records, grid)


@click.group()
def main() -> None:
    """Decision support for thermal-hydrolysis reactor scheduling."""


@main.command()
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--model", "model_path", type=click.Path(), default=None)
@click.option("--ui", "ui_dir", type=click.Path(), default=None)
def serve(port: int | None, config_path: str | None, model_path: str | None, ui_dir: str | None) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    config = _load_service_config(config_path)
    if port is not None:
        config = replace(config, port=port)
    if model_path is not None:
        config = replace(config, model_path=model_path)
    if ui_dir is not None:
        config = replace(config, ui_dir=ui_dir)
    app = create_app(config)
    uvicorn.run(app, host="0.0.0.0", port=config.port, log_level="info")


@main.command()
@click.option("--episodes", type=int, default=3, show_default=True)
@click.option("--steps", type=int, default=96, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
def simulate(episodes: int, steps: int, out_dir: str, seed: int, config_path: str | None) -> None:
    """Write per-episode trajectory CSVs simulated under hysteresis."""
    if episodes < 1 or steps < 1:
        raise click.ClickException("episodes and steps must be positive")
    config = _load_service_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    policy = HysteresisPolicy(
        config.target_level_pct + config.deadband_pct,
        config.target_level_pct - config.deadband_pct,
    )
    for e in range(episodes):
        rng = np.random.default_rng(seed + e)
        inflows = config.inflow.episode(seed=seed + e, horizon=steps)
        state = PlantState(
            t_index=0,
            tank=TankState(config.initial_level_pct, config.capacity_m3),
            reactors=tuple(ReactorStatus(False, 0) for _ in config.reactors),
            op_point=sampledata.OP_PLAYLIST[0],
        )
        statuses = [False] * len(config.reactors)
        deficit = [0] * len(config.reactors)
        rows = []
        for t in range(steps):
            op = sampledata.OP_PLAYLIST[
                (t // sampledata.OP_DWELL_STEPS) % len(sampledata.OP_PLAYLIST)
            ]
            projected = state.tank.level_pct + inflows[t] - sum(
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
            result = step_dynamics(state, config.reactors, float(inflows[t]), statuses, op_point=op)
            state = result.next_state
            if any(statuses):
                energy, quality = sample_observation(op, config.ground_truth, rng)
                energy_s, quality_s = repr(energy), repr(quality)
            else:
                energy_s, quality_s = "", ""
            ts = config.time_origin + timedelta(minutes=config.step_minutes * t)
            rows.append(
                f"{t},{datastore.format_timestamp(ts)},{inflows[t]!r},{state.tank.level_pct!r},"
                + ",".join(str(int(s)) for s in statuses)
                + f",{op.temp_setpoint_c!r},{op.dry_solids_frac!r},{op.cycle_minutes!r},{energy_s},{quality_s}"
            )
        header = "step,timestamp,inflow_pct,level_pct," + ",".join(
            f"reactor{r + 1}" for r in range(len(config.reactors))
        ) + ",temp_setpoint_c,dry_solids_frac,cycle_minutes,energy_kwh_m3,quality_index"
        (out / f"episode_{e:03d}.csv").write_text(
            header + "\n" + "\n".join(rows) + "\n", encoding="utf-8"
        )
    click.echo(f"wrote {episodes} episode CSVs to {out}")


@main.command()
@click.option("--data", "data_path", type=click.Path(), required=True, help="Historian CSV.")
@click.option("--out", "out_path", type=click.Path(), default="model.json", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
def train(data_path: str, out_path: str, seed: int, folds: int, config_path: str | None) -> None:
    """Fit and persist the best regressor from the candidate shootout."""
    config = _load_service_config(config_path)
    try:
        aligned = _aligned_from_historian(_read_text(data_path), config)
        dataset = datastore.build_training_dataset(aligned)
        candidates = [
            learner.gbt_candidate(
                "gbt_200",
                learner.TrainConfig(n_trees=200, max_depth=3, learning_rate=0.1, seed=seed),
            ),
            learner.knn_candidate("knn_5", 5),
            learner.gbt_candidate("mean_predictor", learner.mean_predictor_config(seed)),
        ]
        report, model = learner.model_selection(dataset, candidates, k_folds=folds, seed=seed)
    except HydrotwinError as exc:
        raise click.ClickException(str(exc)) from exc
    datastore.save_model(out_path, model)
    _echo_json(
        {
            "best": report.best_name,
            "rankings": [{"name": n, "cv_rmse": s} for n, s in report.rankings],
            "per_output_rmse": report.per_output_rmse,
            "rows": dataset.n_rows,
            "model_path": str(out_path),
        }
    )


@main.command()
@click.option("--horizon", type=int, default=None, help="Planning horizon in steps.")
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True, help="Historian CSV.")
@click.option("--weather", "weather_path", type=click.Path(), default=None)
@click.option(
    "--forecast",
    type=click.Choice(["feature_model", "seasonal_naive", "moving_average"]),
    default="feature_model",
    show_default=True,
)
@click.option("--config", "config_path", type=click.Path(), default=None)
def plan(
    horizon: int | None,
    model_path: str,
    data_path: str,
    weather_path: str | None,
    forecast: str,
    config_path: str | None,
) -> None:
    """Print a Recommendation JSON for the current plant state."""
    config = _load_service_config(config_path)
    if not Path(model_path).exists():
        raise click.ClickException(f"model not trained: no model file at {model_path}")
    try:
        model = datastore.load_model(model_path)
        aligned = _aligned_from_historian(_read_text(data_path), config)
        inflow_m3 = aligned.series("inflow_m3")
        series = TimeSeries(
            inflow_m3.timestamps,
            inflow_m3.values / config.capacity_m3 * 100.0,
            config.step_minutes,
        )
        planner = replace(
            config.planner_config(horizon=horizon), forecast_method=forecast
        )
        exog = None
        if forecast == "feature_model":
            if weather_path is None:
                raise click.ClickException("--weather is required for the feature_model forecast")
            weather, wreport = datastore.parse_weather_csv(_read_text(weather_path))
            if wreport.errors:
                click.echo(f"warning: {len(wreport.errors)} malformed weather rows skipped", err=True)
            stamps = list(series.timestamps) + list(
                series.future_timestamps(planner.horizon_steps)
            )
            exog = datastore.exog_from_weather(weather, stamps)

        level = config.initial_level_pct
        if "tank_level_pct" in aligned.tags:
            observed = aligned.tags["tank_level_pct"].values
            finite = observed[~np.isnan(observed)]
            if finite.size:
                level = float(finite[-1])
        statuses = []
        for r in range(len(config.reactors)):
            tag = f"reactor{r + 1}_status"
            running = False
            if tag in aligned.tags:
                values = aligned.tags[tag].values
                finite = values[~np.isnan(values)]
                running = bool(finite.size and finite[-1] == 1.0)
            statuses.append(ReactorStatus(running, 1))
        state = PlantState(
            t_index=len(series),
            tank=TankState(min(100.0, max(0.0, level)), config.capacity_m3),
            reactors=tuple(statuses),
            op_point=config.default_op_point,
        )
        rec = engine.plan(
            state, series, exog, model, planner, config.grid, config.policy
        )
    except HydrotwinError as exc:
        raise click.ClickException(str(exc)) from exc
    _echo_json(rec.to_dict())


@main.command()
@click.option("--episodes", type=int, default=20, show_default=True)
@click.option("--steps", type=int, default=96, show_default=True)
@click.option("--seed", type=int, default=2024, show_default=True)
@click.option("--model", "model_path", type=click.Path(), default=None, help="Defaults to the ground-truth oracle.")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.option("--config", "config_path", type=click.Path(), default=None)
def evaluate(
    episodes: int, steps: int, seed: int, model_path: str | None, as_json: bool, config_path: str | None
) -> None:
    """Closed-loop comparison: planned schedule vs hysteresis baseline."""
    config = _load_service_config(config_path)
    model = (
        datastore.load_model(model_path)
        if model_path
        else GroundTruthModel(config.ground_truth)
    )
    spec = engine.EpisodeSpec(
        n_episodes=episodes,
        horizon_steps=steps,
        step_minutes=config.step_minutes,
        base_seed=seed,
        initial_level_pct=config.initial_level_pct,
        target_level_pct=config.target_level_pct,
        capacity_m3=config.capacity_m3,
        omega=config.omega,
        reactors=config.reactors,
        inflow=config.inflow,
        deadband_pct=config.deadband_pct,
    )
    try:
        report = engine.evaluate_closed_loop(
            spec, model, config.grid, config.policy, config.ground_truth
        )
    except HydrotwinError as exc:
        raise click.ClickException(str(exc)) from exc
    if as_json:
        _echo_json(report.to_dict())
        return
    click.echo(f"{'episode':>8} {'rms plan':>10} {'rms base':>10} {'obj plan':>12} {'obj base':>12}")
    for e in report.episodes:
        click.echo(
            f"{e.seed:>8} {e.rms_deviation_plan:>10.3f} {e.rms_deviation_baseline:>10.3f} "
            f"{e.objective_plan:>12.3f} {e.objective_baseline:>12.3f}"
        )
    click.echo(
        f"aggregate rms: plan {report.aggregate_rms_plan:.3f} vs baseline "
        f"{report.aggregate_rms_baseline:.3f} "
        f"(ratio {report.aggregate_rms_plan / report.aggregate_rms_baseline:.3f})"
    )
    click.echo(
        f"total energy: plan {report.total_energy_plan_kwh:.0f} kWh vs baseline "
        f"{report.total_energy_baseline_kwh:.0f} kWh; switches {report.total_switches_plan} "
        f"vs {report.total_switches_baseline}"
    )


@main.command()
@click.option("--file", "file_path", type=click.Path(), required=True)
@click.option(
    "--kind",
    type=click.Choice(["historian", "weather", "auto"]),
    default="auto",
    show_default=True,
)
def ingest(file_path: str, kind: str) -> None:
    """Validate a CSV feed and report accepted rows and row errors."""
    text = _read_text(file_path)
    if kind == "auto":
        first = text.splitlines()[0].strip() if text.strip() else ""
        if first == datastore.HISTORIAN_HEADER:
            kind = "historian"
        elif first == datastore.WEATHER_HEADER:
            kind = "weather"
        else:
            raise click.ClickException(f"unrecognized header {first!r}")
    try:
        if kind == "historian":
            records, report = datastore.parse_historian_csv(text)
        else:
            records, report = datastore.parse_weather_csv(text)
    except ParseError as exc:
        raise click.ClickException(str(exc)) from exc
    _echo_json(
        {
            "kind": kind,
            "accepted_rows": len(records),
            "row_errors": [{"line": e.line, "message": e.message} for e in report.errors],
            "warnings": [{"line": w.line, "message": w.message} for w in report.warnings],
        }
    )


if __name__ == "__main__":
    main()
