"""HTTP+JSON decision-support service with a server-sent event stream.

Owns the single authoritative twin state. All mutations are serialized
under one lock and bump ``state_version``; reads take consistent snapshots.
Long computations (planning) run outside the lock against a snapshot and
commit at the end. The twin only advances via explicit ``/sim/tick``.
"""

from __future__ import annotations

import json
import math
import queue
import threading
from datetime import timedelta
from pathlib import Path
from typing import Iterator

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse

from . import datastore, engine
from .config import ServiceConfig
from .errors import (
    CoverageError,
    DomainError,
    HydrotwinError,
    InfeasibleError,
    InsufficientHistoryError,
    ParseError,
    SizeError,
)
from .forecasting import TimeSeries
from .scheduler import Schedule
from .twin import (
    CYCLE_BOUNDS_MIN,
    DRY_SOLIDS_BOUNDS,
    TEMP_BOUNDS_C,
    OperatingPoint,
    TimeGrid,
    sample_observation,
    step_dynamics,
)

KEEPALIVE_SECONDS = 0.5


class ApiError(Exception):
    """Error with a documented HTTP status and machine-readable code."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={"error": {"status": self.status, "code": self.code, "message": self.message}},
        )


class EventBroadcaster:
    """Fan-out of service events to SSE subscriber queues."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._queues: list[queue.Queue] = []

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._queues.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._queues:
                self._queues.remove(q)

    def publish(self, event: dict) -> None:
        with self._lock:
            for q in self._queues:
                q.put(event)


class ServiceRuntime:
    """Authoritative twin state plus the operations behind the endpoints."""

    def __init__(self, config: ServiceConfig, model=None):
        self.config = config
        self._lock = threading.RLock()
        self.plant = config.initial_plant_state()
        self.state_version = 0
        self.history: list[datastore.HistorianRecord] = []
        self.weather: list[datastore.WeatherRecord] = []
        self.runs = datastore.RunStore(config.run_log_path)
        self.broadcaster = EventBroadcaster()
        self.latest_recommendation: dict | None = None
        self.latest_run_id: int | None = None
        self.active: dict | None = None  # {"schedule", "op_points", "cursor", "run_id"}
        self._rng = np.random.default_rng(config.tick_seed)
        self.model = model
        if self.model is None and config.model_path and Path(config.model_path).exists():
            self.model = datastore.load_model(config.model_path)

    # -- snapshots ---------------------------------------------------------

    def _clock(self, t_index: int | None = None):
        t = self.plant.t_index if t_index is None else t_index
        return self.config.time_origin + timedelta(minutes=self.config.step_minutes * t)

    def _plant_dict(self) -> dict:
        p = self.plant
        return {
            "t_index": p.t_index,
            "clock": datastore.format_timestamp(self._clock()),
            "level_pct": p.tank.level_pct,
            "capacity_m3": p.tank.capacity_m3,
            "reactors": [
                {"id": i + 1, "running": s.running, "steps_in_state": s.steps_in_state}
                for i, s in enumerate(p.reactors)
            ],
            "op_point": {
                "temp_setpoint_c": p.op_point.temp_setpoint_c,
                "dry_solids_frac": p.op_point.dry_solids_frac,
                "cycle_minutes": p.op_point.cycle_minutes,
            },
        }

    def _active_dict(self) -> dict | None:
        if self.active is None:
            return None
        return {
            "run_id": self.active["run_id"],
            "cursor": self.active["cursor"],
            "schedule": self.active["schedule"].to_lists(),
            "op_points": [
                None
                if op is None
                else {
                    "temp_setpoint_c": op.temp_setpoint_c,
                    "dry_solids_frac": op.dry_solids_frac,
                    "cycle_minutes": op.cycle_minutes,
                }
                for op in self.active["op_points"]
            ],
        }

    def _level_history(self) -> list[dict]:
        return [
            {"timestamp": datastore.format_timestamp(rec.timestamp), "level_pct": rec.value}
            for rec in self.history
            if rec.tag == "tank_level_pct"
        ]

    def state_snapshot(self) -> dict:
        with self._lock:
            return {
                "plant": self._plant_dict(),
                "latest_recommendation": self.latest_recommendation,
                "latest_run_id": self.latest_run_id,
                "active_schedule": self._active_dict(),
                "state_version": self.state_version,
                "config": {
                    "target_level_pct": self.config.target_level_pct,
                    "q_min": self.config.policy.q_min,
                    "margin": self.config.policy.margin,
                    "omega": self.config.omega,
                    "step_minutes": self.config.step_minutes,
                    "horizon_steps": self.config.horizon_steps,
                    "op_bounds": {
                        "temp_setpoint_c": list(TEMP_BOUNDS_C),
                        "dry_solids_frac": list(DRY_SOLIDS_BOUNDS),
                        "cycle_minutes": list(CYCLE_BOUNDS_MIN),
                    },
                    "model_trained": self.model is not None,
                },
            }

    def stream_snapshot_event(self) -> dict:
        with self._lock:
            payload = self.state_snapshot()
            payload["level_history"] = self._level_history()
            payload["runs"] = [self._run_dict(r) for r in self.runs.list_newest_first()]
            return {
                "type": "snapshot",
                "payload": payload,
                "state_version": self.state_version,
            }

    @staticmethod
    def _run_dict(record: datastore.RunRecord) -> dict:
        return datastore.run_record_to_dict(record)

    def _publish(self, event_type: str, payload: dict, version: int) -> None:
        self.broadcaster.publish(
            {"type": event_type, "payload": payload, "state_version": version}
        )

    # -- ingestion ---------------------------------------------------------

    def ingest_historian(self, text: str) -> dict:
        try:
            records, report = datastore.parse_historian_csv(text)
        except ParseError as exc:
            raise ApiError(400, "csv_header", str(exc)) from exc
        with self._lock:
            self.history.extend(records)
            self.history.sort(key=lambda rec: (rec.timestamp, rec.tag))
            self._sync_twin_from_history()
            self.state_version += 1
            self._publish("state", self._plant_dict(), self.state_version)
        return {
            "accepted_rows": len(records),
            "row_errors": [{"line": e.line, "message": e.message} for e in report.errors],
        }

    def ingest_weather(self, text: str) -> dict:
        try:
            records, report = datastore.parse_weather_csv(text)
        except ParseError as exc:
            raise ApiError(400, "csv_header", str(exc)) from exc
        with self._lock:
            merged = {rec.date: rec for rec in self.weather}
            merged.update({rec.date: rec for rec in records})
            self.weather = sorted(merged.values(), key=lambda rec: rec.date)
            self.state_version += 1
        return {
            "accepted_rows": len(records),
            "row_errors": [{"line": e.line, "message": e.message} for e in report.errors],
            "warnings": [{"line": w.line, "message": w.message} for w in report.warnings],
        }

    def _sync_twin_from_history(self) -> None:
        """Advance the twin clock past ingested data and adopt the last
        observed level and statuses (the feed stands in for live telemetry)."""
        step = timedelta(minutes=self.config.step_minutes)
        last_idx = -1
        for rec in self.history:
            idx = math.floor((rec.timestamp - self.config.time_origin) / step)
            last_idx = max(last_idx, idx)
        if last_idx + 1 <= self.plant.t_index:
            return
        level = self.plant.tank.level_pct
        statuses = [s.running for s in self.plant.reactors]
        for rec in self.history:
            if rec.tag == "tank_level_pct":
                level = min(100.0, max(0.0, rec.value))
            for r in range(len(statuses)):
                if rec.tag == f"reactor{r + 1}_status":
                    statuses[r] = rec.value == 1.0
        from .twin import PlantState, ReactorStatus, TankState

        self.plant = PlantState(
            t_index=last_idx + 1,
            tank=TankState(level, self.plant.tank.capacity_m3),
            reactors=tuple(ReactorStatus(s, 1) for s in statuses),
            op_point=self.plant.op_point,
        )

    # -- planning ----------------------------------------------------------

    def _history_series(self) -> TimeSeries:
        with self._lock:
            records = list(self.history)
            horizon = self.plant.t_index
        if horizon < 1:
            raise ApiError(422, "insufficient_history", "no history ingested or simulated yet")
        grid = TimeGrid(self.config.time_origin, self.config.step_minutes, horizon)
        aligned = datastore.align_to_grid(records, grid)
        try:
            inflow = aligned.series("inflow_m3")
        except CoverageError as exc:
            raise ApiError(422, "coverage", str(exc)) from exc
        return TimeSeries(
            inflow.timestamps,
            inflow.values / self.config.capacity_m3 * 100.0,
            self.config.step_minutes,
        )

    def plan(
        self,
        horizon_steps: int | None = None,
        omega: float | None = None,
        grid: engine.ScenarioGrid | None = None,
        policy: engine.QualityPolicy | None = None,
    ) -> dict:
        if self.model is None:
            raise ApiError(409, "untrained_model", "no trained model is loaded")
        planner = self.config.planner_config(horizon=horizon_steps, omega=omega)
        series = self._history_series()
        exog = None
        if planner.forecast_method == "feature_model":
            stamps = list(series.timestamps) + list(
                series.future_timestamps(planner.horizon_steps)
            )
            try:
                exog = datastore.exog_from_weather(self.weather, stamps)
            except CoverageError as exc:
                raise ApiError(422, "coverage", str(exc)) from exc
        with self._lock:
            state = self.plant
        try:
            rec = engine.plan(
                state,
                series,
                exog,
                self.model,
                planner,
                grid or self.config.grid,
                policy or self.config.policy,
            )
        except InsufficientHistoryError as exc:
            raise ApiError(422, "insufficient_history", str(exc)) from exc
        except CoverageError as exc:
            raise ApiError(422, "coverage", str(exc)) from exc
        except InfeasibleError as exc:
            raise ApiError(422, "infeasible", str(exc)) from exc
        except SizeError as exc:
            raise ApiError(422, "size", str(exc)) from exc

        rec_dict = rec.to_dict()
        with self._lock:
            record = self.runs.append(
                rec_dict, datastore.parse_timestamp(rec.created_at_iso)
            )
            self.latest_recommendation = rec_dict
            self.latest_run_id = record.run_id
            self.state_version += 1
            self._publish(
                "recommendation",
                {"run_id": record.run_id, "recommendation": rec_dict},
                self.state_version,
            )
        return rec_dict

    def whatif(self, op_data: dict) -> dict:
        if self.model is None:
            raise ApiError(409, "untrained_model", "no trained model is loaded")
        try:
            op = OperatingPoint(
                float(op_data["temp_setpoint_c"]),
                float(op_data["dry_solids_frac"]),
                float(op_data["cycle_minutes"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(400, "bad_request", f"malformed op_point: {exc}") from exc
        except DomainError as exc:
            raise ApiError(400, "out_of_bounds", str(exc)) from exc
        pred = np.atleast_2d(self.model.predict(op.as_row()))
        e_col, q_col = engine._target_columns(self.model)
        energy = float(pred[0, e_col])
        quality = float(pred[0, q_col])
        return {
            "predicted_energy": energy,
            "predicted_quality": quality,
            "feasible": bool(quality >= self.config.policy.threshold),
        }

    # -- operator actions ----------------------------------------------------

    def operator_action(
        self, run_id: int, kind: str, schedule_edits, actor: str, op_point: dict | None = None
    ) -> dict:
        if kind not in ("accept", "override"):
            raise ApiError(400, "bad_request", f"kind must be accept|override, got {kind!r}")
        edits = list(schedule_edits or [])
        if kind == "accept" and edits:
            raise ApiError(400, "bad_request", "accept does not take schedule_edits")
        override_op: OperatingPoint | None = None
        if op_point is not None:
            if kind != "override":
                raise ApiError(400, "bad_request", "op_point is only valid with an override")
            try:
                override_op = OperatingPoint(
                    float(op_point["temp_setpoint_c"]),
                    float(op_point["dry_solids_frac"]),
                    float(op_point["cycle_minutes"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ApiError(400, "bad_request", f"malformed op_point: {exc}") from exc
            except DomainError as exc:
                raise ApiError(400, "out_of_bounds", str(exc)) from exc
        with self._lock:
            record = self.runs.get(run_id)
            if record is None:
                raise ApiError(404, "not_found", f"unknown run id {run_id}")
            if record.operator_action is not None:
                raise ApiError(409, "conflict", f"run {run_id} already actioned")
            rec = record.recommendation
            matrix = [list(row) for row in rec["schedule"]]
            for edit in edits:
                try:
                    r = int(edit["reactor"]) - 1
                    t = int(edit["step"])
                    on = bool(edit["on"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise ApiError(400, "bad_request", f"malformed schedule edit: {exc}") from exc
                if not (0 <= r < len(matrix) and 0 <= t < len(matrix[0])):
                    raise ApiError(400, "bad_request", f"edit out of range: reactor {r + 1}, step {t}")
                matrix[r][t] = int(on)
            schedule = Schedule.from_matrix(matrix)
            selected = rec.get("selected_candidate")
            fallback_op = (
                OperatingPoint(
                    selected["temp_setpoint_c"],
                    selected["dry_solids_frac"],
                    selected["cycle_minutes"],
                )
                if selected
                else self.config.default_op_point
            )
            op_points = []
            for t in range(schedule.horizon):
                if not any(schedule.x[r][t] for r in range(schedule.n_reactors)):
                    op_points.append(None)
                    continue
                if override_op is not None:
                    op_points.append(override_op)
                    continue
                stated = rec["op_points"][t] if t < len(rec["op_points"]) else None
                op_points.append(
                    OperatingPoint(
                        stated["temp_setpoint_c"],
                        stated["dry_solids_frac"],
                        stated["cycle_minutes"],
                    )
                    if stated
                    else fallback_op
                )
            action = datastore.OperatorAction(
                kind=kind,
                actor=actor or "operator",
                at=self._clock(),
                schedule_edits=tuple(edits),
                op_point=op_point if override_op is not None else None,
            )
            updated = self.runs.record_action(run_id, action)
            self.active = {
                "schedule": schedule,
                "op_points": op_points,
                "cursor": 0,
                "run_id": run_id,
            }
            self.state_version += 1
            payload = self._run_dict(updated)
            self._publish("action", payload, self.state_version)
        return payload

    # -- simulation ----------------------------------------------------------

    def tick(self, steps: int) -> dict:
        if steps < 1:
            raise ApiError(400, "bad_request", "steps must be >= 1")
        overflow_any = False
        underflow_any = False
        no_schedule = False
        with self._lock:
            for _ in range(steps):
                t_before = self.plant.t_index
                ts = self._clock(t_before)
                rain = 0.0
                for w in self.weather:
                    if w.date == ts.date():
                        rain = w.rainfall_mm
                        break
                inflow = self.config.inflow.sample(
                    self._rng, t_before, rainfall_mm=rain, weekday=ts.weekday()
                )
                if self.active is not None and self.active["cursor"] < self.active["schedule"].horizon:
                    cursor = self.active["cursor"]
                    decisions = [
                        self.active["schedule"].x[r][cursor]
                        for r in range(self.active["schedule"].n_reactors)
                    ]
                    op = self.active["op_points"][cursor]
                    self.active["cursor"] = cursor + 1
                else:
                    decisions = [False] * len(self.config.reactors)
                    op = None
                    no_schedule = True
                if any(decisions) and op is None:
                    op = self.config.default_op_point
                result = step_dynamics(
                    self.plant, self.config.reactors, inflow, decisions, op_point=op
                )
                self.plant = result.next_state
                overflow_any |= result.overflow
                underflow_any |= result.underflow

                self.history.append(
                    datastore.HistorianRecord(ts, "inflow_m3", inflow * self.config.capacity_m3 / 100.0)
                )
                self.history.append(
                    datastore.HistorianRecord(ts, "tank_level_pct", self.plant.tank.level_pct)
                )
                for r, on in enumerate(decisions):
                    self.history.append(
                        datastore.HistorianRecord(ts, f"reactor{r + 1}_status", float(on))
                    )
                if any(decisions):
                    energy, quality = sample_observation(op, self.config.ground_truth, self._rng)
                    self.history.append(datastore.HistorianRecord(ts, "temp_setpoint_c", op.temp_setpoint_c))
                    self.history.append(datastore.HistorianRecord(ts, "dry_solids_frac", op.dry_solids_frac))
                    self.history.append(datastore.HistorianRecord(ts, "cycle_minutes", op.cycle_minutes))
                    self.history.append(datastore.HistorianRecord(ts, "energy_kwh_m3", energy))
                    self.history.append(datastore.HistorianRecord(ts, "quality_index", quality))

                self.state_version += 1
                version = self.state_version
                step_payload = {
                    **self._plant_dict(),
                    "inflow_pct": inflow,
                    "overflow": result.overflow,
                    "underflow": result.underflow,
                }
                self._publish("state", step_payload, version)
                if result.overflow or result.underflow:
                    self._publish(
                        "violation",
                        {
                            "t_index": self.plant.t_index,
                            "overflow": result.overflow,
                            "underflow": result.underflow,
                            "level_pct": self.plant.tank.level_pct,
                        },
                        version,
                    )
            plant = self._plant_dict()
            version = self.state_version
        return {
            "plant": plant,
            "state_version": version,
            "steps": steps,
            "overflow": overflow_any,
            "underflow": underflow_any,
            "no_active_schedule": no_schedule,
        }


def sse_format(event: dict) -> str:
    return f"event: {event['type']}\ndata: {json.dumps(event, sort_keys=True)}\n\n"


def create_app(config: ServiceConfig | None = None, model=None) -> FastAPI:
    config = config or ServiceConfig()
    runtime = ServiceRuntime(config, model=model)
    app = FastAPI(title="hydrotwin", docs_url=None, redoc_url=None)
    app.state.runtime = runtime

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(HydrotwinError)
    async def _domain_error(_req: Request, exc: HydrotwinError):
        return ApiError(400, "bad_request", str(exc)).response()

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return ApiError(400, "validation", str(exc.errors()[:1])).response()

    @app.exception_handler(Exception)
    async def _unexpected_error(_req: Request, exc: Exception):
        # never leak stack traces; keep the documented error shape
        return ApiError(500, "internal", type(exc).__name__).response()

    @app.get("/api/v1/state")
    def get_state():
        return runtime.state_snapshot()

    @app.post("/api/v1/ingest/historian")
    async def ingest_historian(request: Request):
        body = await request.body()
        return runtime.ingest_historian(body.decode("utf-8"))

    @app.post("/api/v1/ingest/weather")
    async def ingest_weather(request: Request):
        body = await request.body()
        return runtime.ingest_weather(body.decode("utf-8"))

    @app.post("/api/v1/plan")
    def post_plan(body: dict):
        horizon = body.get("horizon_steps")
        if horizon is not None and (not isinstance(horizon, int) or horizon < 1):
            raise ApiError(400, "bad_request", f"horizon_steps must be a positive integer, got {horizon!r}")
        omega = body.get("omega")
        if omega is not None and (not isinstance(omega, (int, float)) or omega < 0):
            raise ApiError(400, "bad_request", "omega must be a non-negative number")
        grid = None
        if "grid" in body and body["grid"] is not None:
            g = body["grid"]
            try:
                grid = engine.ScenarioGrid(
                    temp=engine.AxisSpec(*[float(v) for v in g["temp"]]),
                    dry_solids=engine.AxisSpec(*[float(v) for v in g["dry_solids"]]),
                    cycle=engine.AxisSpec(*[float(v) for v in g["cycle"]]),
                )
            except (KeyError, TypeError, ValueError, DomainError) as exc:
                raise ApiError(400, "bad_request", f"malformed grid: {exc}") from exc
        policy = None
        if "policy" in body and body["policy"] is not None:
            try:
                policy = engine.QualityPolicy(
                    q_min=float(body["policy"].get("q_min", config.policy.q_min)),
                    margin=float(body["policy"].get("margin", config.policy.margin)),
                )
            except (TypeError, ValueError, DomainError) as exc:
                raise ApiError(400, "bad_request", f"malformed policy: {exc}") from exc
        return runtime.plan(horizon, omega, grid, policy)

    @app.post("/api/v1/whatif")
    def post_whatif(body: dict):
        op = body.get("op_point", body)
        if not isinstance(op, dict):
            raise ApiError(400, "bad_request", "op_point must be an object")
        return runtime.whatif(op)

    @app.post("/api/v1/operator/action")
    def post_action(body: dict):
        if "run_id" not in body or not isinstance(body["run_id"], int):
            raise ApiError(400, "bad_request", "run_id must be an integer")
        return runtime.operator_action(
            run_id=body["run_id"],
            kind=body.get("kind", ""),
            schedule_edits=body.get("schedule_edits"),
            actor=body.get("actor", "operator"),
            op_point=body.get("op_point"),
        )

    @app.post("/api/v1/sim/tick")
    def post_tick(body: dict | None = None):
        steps = (body or {}).get("steps", 1)
        if not isinstance(steps, int):
            raise ApiError(400, "bad_request", "steps must be an integer")
        return runtime.tick(steps)

    @app.get("/api/v1/runs")
    def get_runs(limit: int = 50, offset: int = 0):
        if limit < 1 or offset < 0:
            raise ApiError(400, "bad_request", "limit must be >= 1 and offset >= 0")
        records = runtime.runs.list_newest_first(limit=limit, offset=offset)
        return {
            "runs": [runtime._run_dict(r) for r in records],
            "total": len(runtime.runs),
            "limit": limit,
            "offset": offset,
        }

    @app.get("/api/v1/runs/{run_id}")
    def get_run(run_id: int):
        record = runtime.runs.get(run_id)
        if record is None:
            raise ApiError(404, "not_found", f"unknown run id {run_id}")
        return runtime._run_dict(record)

    @app.get("/api/v1/stream")
    def get_stream():
        def event_stream() -> Iterator[str]:
            # subscribe first, then snapshot: events racing the snapshot are
            # deduplicated by version so the client always starts from the
            # snapshot and only sees newer events after it
            q = runtime.broadcaster.subscribe()
            try:
                snapshot = runtime.stream_snapshot_event()
                yield sse_format(snapshot)
                while True:
                    try:
                        event = q.get(timeout=KEEPALIVE_SECONDS)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    if event["state_version"] <= snapshot["state_version"]:
                        continue
                    yield sse_format(event)
            finally:
                runtime.broadcaster.unsubscribe(q)

        return StreamingResponse(event_stream(), media_type="text/event-stream")

    if config.ui_dir and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
