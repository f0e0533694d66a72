"""Data ingestion, grid alignment, dataset assembly, and persistence.

CSV parsers for the plant historian and daily weather feeds (malformed rows
are reported with 1-based line numbers, never silently dropped), alignment
of raw records onto a planning grid, training-dataset assembly, and
versioned JSON persistence for models, problems, solutions and
recommendation runs (run log is append-only JSON lines).
"""

from __future__ import annotations

import csv
import io
import json
import math
import threading
from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import learner
from .errors import (
    CoverageError,
    DomainError,
    EmptyDatasetError,
    IncompatibleVersionError,
    ParseError,
)
from .forecasting import ExogFeatures, TimeSeries
from .scheduler import Schedule, ScheduleProblem, ScheduleSolution
from .twin import ReactorSpec, TimeGrid

SCHEMA_VERSION = 1

STATUS_TAGS = ("reactor1_status", "reactor2_status", "reactor3_status")
CONTINUOUS_TAGS = (
    "tank_level_pct",
    "inflow_m3",
    "temp_setpoint_c",
    "dry_solids_frac",
    "cycle_minutes",
    "energy_kwh_m3",
    "quality_index",
)
KNOWN_TAGS = CONTINUOUS_TAGS + STATUS_TAGS

HISTORIAN_HEADER = "timestamp,tag,value"
WEATHER_HEADER = "date,rainfall_mm,temp_max_c,temp_min_c"


@dataclass(frozen=True)
class HistorianRecord:
    timestamp: datetime
    tag: str
    value: float


@dataclass(frozen=True)
class WeatherRecord:
    date: date
    rainfall_mm: float
    temp_max_c: float
    temp_min_c: float


@dataclass(frozen=True)
class RowIssue:
    line: int
    message: str


@dataclass(frozen=True)
class ParseReport:
    errors: tuple[RowIssue, ...]
    warnings: tuple[RowIssue, ...] = ()


def parse_timestamp(text: str) -> datetime:
    """RFC 3339 UTC instant; 'Z' and '+00:00' accepted, other offsets rejected."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValueError(f"invalid timestamp {text!r}") from exc
    if ts.tzinfo is None or ts.utcoffset() != timedelta(0):
        raise ValueError(f"timestamp {text!r} is not UTC")
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    out = ts.astimezone(timezone.utc).isoformat()
    return out.replace("+00:00", "Z")


def parse_historian_csv(text: str) -> tuple[list[HistorianRecord], ParseReport]:
    """Parse the historian feed; valid rows sorted by (timestamp, tag)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty document: missing historian header") from None
    if [h.strip() for h in header] != HISTORIAN_HEADER.split(","):
        raise ParseError(
            f"bad historian header {','.join(header)!r}, expected {HISTORIAN_HEADER!r}"
        )
    records: list[HistorianRecord] = []
    errors: list[RowIssue] = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            errors.append(RowIssue(line_no, f"expected 3 fields, got {len(row)}"))
            continue
        ts_text, tag, value_text = (field.strip() for field in row)
        if tag not in KNOWN_TAGS:
            errors.append(RowIssue(line_no, f"unknown tag {tag!r}"))
            continue
        try:
            ts = parse_timestamp(ts_text)
        except ValueError as exc:
            errors.append(RowIssue(line_no, str(exc)))
            continue
        try:
            value = float(value_text)
        except ValueError:
            errors.append(RowIssue(line_no, f"non-numeric value {value_text!r}"))
            continue
        if not math.isfinite(value):
            errors.append(RowIssue(line_no, f"non-finite value {value_text!r}"))
            continue
        if tag in STATUS_TAGS and value not in (0.0, 1.0):
            errors.append(RowIssue(line_no, f"status value must be 0 or 1, got {value_text}"))
            continue
        records.append(HistorianRecord(ts, tag, value))
    records.sort(key=lambda rec: (rec.timestamp, rec.tag))
    return records, ParseReport(tuple(errors))


def parse_weather_csv(text: str) -> tuple[list[WeatherRecord], ParseReport]:
    """Parse daily weather; duplicate dates keep the later row with a warning."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty document: missing weather header") from None
    if [h.strip() for h in header] != WEATHER_HEADER.split(","):
        raise ParseError(
            f"bad weather header {','.join(header)!r}, expected {WEATHER_HEADER!r}"
        )
    by_date: dict[date, WeatherRecord] = {}
    errors: list[RowIssue] = []
    warnings: list[RowIssue] = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            errors.append(RowIssue(line_no, f"expected 4 fields, got {len(row)}"))
            continue
        date_text, rain_text, tmax_text, tmin_text = (f.strip() for f in row)
        try:
            day = date.fromisoformat(date_text)
        except ValueError:
            errors.append(RowIssue(line_no, f"invalid date {date_text!r}"))
            continue
        try:
            rain, tmax, tmin = float(rain_text), float(tmax_text), float(tmin_text)
        except ValueError:
            errors.append(RowIssue(line_no, "non-numeric field"))
            continue
        if not all(math.isfinite(v) for v in (rain, tmax, tmin)):
            errors.append(RowIssue(line_no, "non-finite field"))
            continue
        if rain < 0:
            errors.append(RowIssue(line_no, f"negative rainfall {rain}"))
            continue
        if tmin > tmax:
            errors.append(RowIssue(line_no, f"temp_min {tmin} exceeds temp_max {tmax}"))
            continue
        if day in by_date:
            warnings.append(RowIssue(line_no, f"duplicate date {date_text}, later row wins"))
        by_date[day] = WeatherRecord(day, rain, tmax, tmin)
    records = sorted(by_date.values(), key=lambda rec: rec.date)
    return records, ParseReport(tuple(errors), tuple(warnings))


def historian_records_to_csv(records: Sequence[HistorianRecord]) -> str:
    lines = [HISTORIAN_HEADER]
    lines += [
        f"{format_timestamp(rec.timestamp)},{rec.tag},{rec.value!r}" for rec in records
    ]
    return "\n".join(lines) + "\n"


def weather_records_to_csv(records: Sequence[WeatherRecord]) -> str:
    lines = [WEATHER_HEADER]
    lines += [
        f"{rec.date.isoformat()},{rec.rainfall_mm!r},{rec.temp_max_c!r},{rec.temp_min_c!r}"
        for rec in records
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Grid alignment


@dataclass(frozen=True)
class AlignedTag:
    tag: str
    values: np.ndarray  # NaN where unresolved
    missing_steps: tuple[int, ...]

    @property
    def fully_resolved(self) -> bool:
        return not self.missing_steps


@dataclass(frozen=True)
class AlignedData:
    grid: TimeGrid
    tags: dict[str, AlignedTag]

    def series(self, tag: str) -> TimeSeries:
        if tag not in self.tags:
            raise CoverageError(f"tag {tag!r} absent from aligned data")
        aligned = self.tags[tag]
        if not aligned.fully_resolved:
            raise CoverageError(
                f"tag {tag!r} has unresolved steps {list(aligned.missing_steps)[:8]}"
            )
        stamps = tuple(self.grid.step_time(i) for i in range(self.grid.horizon_steps))
        return TimeSeries(stamps, aligned.values, self.grid.step_minutes)

    def missing_report(self) -> dict[str, tuple[int, ...]]:
        return {
            tag: aligned.missing_steps
            for tag, aligned in self.tags.items()
            if aligned.missing_steps
        }


def align_to_grid(
    records: Sequence[HistorianRecord], grid: TimeGrid, fill_limit: int = 3
) -> AlignedData:
    """Aggregate records into grid windows [t, t+step).

    Continuous tags average within a window; status tags take the last
    observation. Gaps forward-fill up to ``fill_limit`` consecutive steps;
    longer gaps (and leading gaps) stay NaN and are reported via
    ``missing_steps`` rather than silently filled.
    """
    horizon = grid.horizon_steps
    step = timedelta(minutes=grid.step_minutes)
    buckets: dict[str, dict[int, list[float]]] = {}
    for rec in sorted(records, key=lambda r: r.timestamp):
        offset = (rec.timestamp - grid.start) / step
        idx = math.floor(offset)
        if idx < 0 or idx >= horizon:
            continue
        buckets.setdefault(rec.tag, {}).setdefault(idx, []).append(rec.value)

    tags: dict[str, AlignedTag] = {}
    for tag, windows in buckets.items():
        values = np.full(horizon, np.nan)
        for idx, window_values in windows.items():
            if tag in STATUS_TAGS:
                values[idx] = window_values[-1]
            else:
                values[idx] = float(np.mean(window_values))
        gap = 0
        for i in range(horizon):
            if np.isnan(values[i]):
                gap += 1
                if 0 < i and gap <= fill_limit and not np.isnan(values[i - 1]):
                    values[i] = values[i - 1]
            else:
                gap = 0
        missing = tuple(int(i) for i in np.nonzero(np.isnan(values))[0])
        tags[tag] = AlignedTag(tag, values, missing)
    return AlignedData(grid, tags)


def build_training_dataset(aligned: AlignedData) -> learner.Dataset:
    """One row per step with a full operating point, both targets, and at
    least one reactor running."""
    feature_tags = ("temp_setpoint_c", "dry_solids_frac", "cycle_minutes")
    target_tags = ("energy_kwh_m3", "quality_index")
    needed = feature_tags + target_tags
    for tag in needed:
        if tag not in aligned.tags:
            raise EmptyDatasetError(f"required tag {tag!r} absent from aligned data")
    horizon = aligned.grid.horizon_steps
    any_on = np.zeros(horizon, dtype=bool)
    for tag in STATUS_TAGS:
        if tag in aligned.tags:
            any_on |= aligned.tags[tag].values == 1.0
    usable = any_on.copy()
    for tag in needed:
        usable &= ~np.isnan(aligned.tags[tag].values)
    if not usable.any():
        raise EmptyDatasetError("no usable training rows after alignment")
    features = np.column_stack([aligned.tags[t].values[usable] for t in feature_tags])
    targets = np.column_stack([aligned.tags[t].values[usable] for t in target_tags])
    return learner.Dataset(features, targets, feature_tags, target_tags)


def exog_from_weather(
    weather: Sequence[WeatherRecord], timestamps: Sequence[datetime]
) -> ExogFeatures:
    """Broadcast daily weather onto per-step timestamps."""
    by_date = {rec.date: rec for rec in weather}
    rain = np.empty(len(timestamps))
    tmax = np.empty(len(timestamps))
    for i, ts in enumerate(timestamps):
        rec = by_date.get(ts.date())
        if rec is None:
            raise CoverageError(f"no weather record for {ts.date().isoformat()}")
        rain[i] = rec.rainfall_mm
        tmax[i] = rec.temp_max_c
    return ExogFeatures(tuple(timestamps), rain, tmax)


# ---------------------------------------------------------------------------
# Versioned JSON persistence


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def dump_document(kind: str, payload: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "payload": payload}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def parse_document(text: str, expected_kind: str | None = None) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON document: {exc}") from exc
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ParseError("document missing schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise IncompatibleVersionError(
            f"schema_version {doc['schema_version']} unsupported (expected {SCHEMA_VERSION})"
        )
    if expected_kind is not None and doc.get("kind") != expected_kind:
        raise ParseError(f"expected kind {expected_kind!r}, got {doc.get('kind')!r}")
    return doc


def save_document(path: str | Path, kind: str, payload: dict) -> None:
    Path(path).write_text(dump_document(kind, payload), encoding="utf-8")


def load_document(path: str | Path, expected_kind: str | None = None) -> dict:
    return parse_document(Path(path).read_text(encoding="utf-8"), expected_kind)


def model_to_payload(model) -> tuple[str, dict]:
    if isinstance(model, learner.GBTModel):
        return "gbt_model", gbt_to_dict(model)
    if isinstance(model, learner.KnnModel):
        return "knn_model", knn_to_dict(model)
    raise DomainError(f"unsupported model type {type(model).__name__}")


def save_model(path: str | Path, model) -> None:
    kind, payload = model_to_payload(model)
    save_document(path, kind, payload)


def load_model(path: str | Path):
    doc = load_document(path)
    if doc["kind"] == "gbt_model":
        return gbt_from_dict(doc["payload"])
    if doc["kind"] == "knn_model":
        return knn_from_dict(doc["payload"])
    raise ParseError(f"document kind {doc['kind']!r} is not a model")


def _tree_to_dict(node: learner.TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _tree_to_dict(node.left),
        "right": _tree_to_dict(node.right),
    }


def _tree_from_dict(data: dict) -> learner.TreeNode:
    if "value" in data:
        return learner.TreeNode(value=float(data["value"]))
    return learner.TreeNode(
        feature=int(data["feature"]),
        threshold=float(data["threshold"]),
        left=_tree_from_dict(data["left"]),
        right=_tree_from_dict(data["right"]),
    )


def gbt_to_dict(model: learner.GBTModel) -> dict:
    return {
        "config": {
            "n_trees": model.config.n_trees,
            "max_depth": model.config.max_depth,
            "learning_rate": model.config.learning_rate,
            "min_samples_leaf": model.config.min_samples_leaf,
            "seed": model.config.seed,
        },
        "feature_names": list(model.feature_names),
        "outputs": [
            {
                "name": out.name,
                "init_value": out.init_value,
                "trees": [_tree_to_dict(tree.root) for tree in out.trees],
            }
            for out in model.outputs
        ],
    }


def gbt_from_dict(data: dict) -> learner.GBTModel:
    config = learner.TrainConfig(**data["config"])
    outputs = tuple(
        learner.GBTOutput(
            name=out["name"],
            init_value=float(out["init_value"]),
            trees=tuple(
                learner.RegressionTree(_tree_from_dict(t)) for t in out["trees"]
            ),
        )
        for out in data["outputs"]
    )
    return learner.GBTModel(outputs, config, tuple(data["feature_names"]))


def knn_to_dict(model: learner.KnnModel) -> dict:
    return {
        "k": model.k,
        "feature_mean": model.feature_mean.tolist(),
        "feature_std": model.feature_std.tolist(),
        "standardized_features": model.standardized_features.tolist(),
        "targets": model.targets.tolist(),
        "feature_names": list(model.feature_names),
        "target_names": list(model.target_names),
    }


def knn_from_dict(data: dict) -> learner.KnnModel:
    return learner.KnnModel(
        k=int(data["k"]),
        feature_mean=np.array(data["feature_mean"], dtype=float),
        feature_std=np.array(data["feature_std"], dtype=float),
        standardized_features=np.array(data["standardized_features"], dtype=float),
        targets=np.array(data["targets"], dtype=float),
        feature_names=tuple(data["feature_names"]),
        target_names=tuple(data["target_names"]),
    )


def grid_to_dict(grid: TimeGrid) -> dict:
    return {
        "start": format_timestamp(grid.start),
        "step_minutes": grid.step_minutes,
        "horizon_steps": grid.horizon_steps,
    }


def grid_from_dict(data: dict) -> TimeGrid:
    return TimeGrid(
        start=parse_timestamp(data["start"]),
        step_minutes=int(data["step_minutes"]),
        horizon_steps=int(data["horizon_steps"]),
    )


def problem_to_dict(problem: ScheduleProblem) -> dict:
    return {
        "grid": grid_to_dict(problem.grid),
        "reactors": [
            {
                "id": spec.id,
                "rate_pct_per_step": spec.rate_pct_per_step,
                "min_up_steps": spec.min_up_steps,
                "min_down_steps": spec.min_down_steps,
            }
            for spec in problem.reactors
        ],
        "initial_status": [int(s) for s in problem.initial_status],
        "initial_level_pct": problem.initial_level_pct,
        "target_level_pct": problem.target_level_pct,
        "inflow_forecast_pct": list(problem.inflow_forecast_pct),
        "omega": problem.omega,
        "level_bounds": list(problem.level_bounds) if problem.level_bounds else None,
    }


def problem_from_dict(data: dict) -> ScheduleProblem:
    return ScheduleProblem(
        grid=grid_from_dict(data["grid"]),
        reactors=tuple(
            ReactorSpec(
                id=int(r["id"]),
                rate_pct_per_step=float(r["rate_pct_per_step"]),
                min_up_steps=int(r["min_up_steps"]),
                min_down_steps=int(r["min_down_steps"]),
            )
            for r in data["reactors"]
        ),
        initial_status=tuple(bool(s) for s in data["initial_status"]),
        initial_level_pct=float(data["initial_level_pct"]),
        target_level_pct=float(data["target_level_pct"]),
        inflow_forecast_pct=tuple(float(v) for v in data["inflow_forecast_pct"]),
        omega=float(data["omega"]),
        level_bounds=tuple(data["level_bounds"]) if data.get("level_bounds") else None,
    )


def solution_to_dict(solution: ScheduleSolution) -> dict:
    return {
        "schedule": solution.schedule.to_lists(),
        "objective": solution.objective,
        "deviation_sum": solution.deviation_sum,
        "switch_count": solution.switch_count,
        "omega_used": solution.omega_used,
        "optimal": solution.optimal,
        "nodes_explored": solution.nodes_explored,
    }


def solution_from_dict(data: dict) -> ScheduleSolution:
    return ScheduleSolution(
        schedule=Schedule.from_matrix(data["schedule"]),
        objective=float(data["objective"]),
        deviation_sum=float(data["deviation_sum"]),
        switch_count=int(data["switch_count"]),
        omega_used=float(data["omega_used"]),
        optimal=bool(data["optimal"]),
        nodes_explored=int(data["nodes_explored"]),
    )


def save_problem(path: str | Path, problem: ScheduleProblem) -> None:
    save_document(path, "schedule_problem", problem_to_dict(problem))


def load_problem(path: str | Path) -> ScheduleProblem:
    return problem_from_dict(load_document(path, "schedule_problem")["payload"])


def save_solution(path: str | Path, solution: ScheduleSolution) -> None:
    save_document(path, "schedule_solution", solution_to_dict(solution))


def load_solution(path: str | Path) -> ScheduleSolution:
    return solution_from_dict(load_document(path, "schedule_solution")["payload"])


def save_recommendation(path: str | Path, recommendation: dict) -> None:
    """Recommendations persist as their wire-format dicts (engine to_dict)."""
    save_document(path, "recommendation", recommendation)


def load_recommendation(path: str | Path) -> dict:
    return load_document(path, "recommendation")["payload"]


# ---------------------------------------------------------------------------
# Run store (append-only)


@dataclass(frozen=True)
class OperatorAction:
    kind: str  # "accept" | "override"
    actor: str
    at: datetime
    schedule_edits: tuple[dict, ...] = ()
    op_point: dict | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("accept", "override"):
            raise DomainError(f"action kind must be accept|override, got {self.kind!r}")


@dataclass(frozen=True)
class RunRecord:
    run_id: int
    created_at: datetime
    recommendation: dict
    operator_action: OperatorAction | None = None


def action_to_dict(action: OperatorAction) -> dict:
    return {
        "kind": action.kind,
        "actor": action.actor,
        "at": format_timestamp(action.at),
        "schedule_edits": list(action.schedule_edits),
        "op_point": action.op_point,
    }


def action_from_dict(data: dict) -> OperatorAction:
    return OperatorAction(
        kind=data["kind"],
        actor=data["actor"],
        at=parse_timestamp(data["at"]),
        schedule_edits=tuple(data.get("schedule_edits", [])),
        op_point=data.get("op_point"),
    )


def run_record_to_dict(record: RunRecord) -> dict:
    return {
        "run_id": record.run_id,
        "created_at": format_timestamp(record.created_at),
        "recommendation": record.recommendation,
        "operator_action": None
        if record.operator_action is None
        else action_to_dict(record.operator_action),
    }


def run_record_from_dict(data: dict) -> RunRecord:
    action = data.get("operator_action")
    return RunRecord(
        run_id=int(data["run_id"]),
        created_at=parse_timestamp(data["created_at"]),
        recommendation=data["recommendation"],
        operator_action=action_from_dict(action) if action else None,
    )


class RunStore:
    """Append-only recommendation run log: one RunRecord JSON per line.

    Recording an operator action appends the full updated record (the file
    is never rewritten); on reload the last line per run id wins, keeping
    first-appearance order. Appends are serialized under a lock so
    concurrent callers get unique, strictly increasing ids.
    """

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._runs: dict[int, RunRecord] = {}
        self._order: list[int] = []
        if self._path is not None and self._path.exists():
            self._replay(self._path.read_text(encoding="utf-8"))

    def _replay(self, text: str) -> None:
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"run log line {line_no}: {exc}") from exc
            if data.get("schema_version") != SCHEMA_VERSION:
                raise IncompatibleVersionError(
                    f"run log line {line_no}: unsupported schema_version"
                )
            if data.get("kind") != "run_record":
                raise ParseError(f"run log line {line_no}: expected a run_record")
            record = run_record_from_dict(data)
            if record.run_id not in self._runs:
                self._order.append(record.run_id)
            self._runs[record.run_id] = record

    def _append_line(self, record: RunRecord) -> None:
        if self._path is None:
            return
        line = {
            "schema_version": SCHEMA_VERSION,
            "kind": "run_record",
            **run_record_to_dict(record),
        }
        with self._path.open("a", encoding="utf-8") as fh:
            fh.write(canonical_json(line) + "\n")

    def append(self, recommendation: dict, created_at: datetime) -> RunRecord:
        with self._lock:
            run_id = (self._order[-1] if self._order else 0) + 1
            record = RunRecord(run_id, created_at, recommendation)
            self._runs[run_id] = record
            self._order.append(run_id)
            self._append_line(record)
            return record

    def record_action(self, run_id: int, action: OperatorAction) -> RunRecord:
        with self._lock:
            if run_id not in self._runs:
                raise KeyError(f"unknown run id {run_id}")
            if self._runs[run_id].operator_action is not None:
                raise ValueError(f"run {run_id} already actioned")
            updated = replace(self._runs[run_id], operator_action=action)
            self._runs[run_id] = updated
            self._append_line(updated)
            return updated

    def get(self, run_id: int) -> RunRecord | None:
        with self._lock:
            return self._runs.get(run_id)

    def list_newest_first(self, limit: int | None = None, offset: int = 0) -> list[RunRecord]:
        with self._lock:
            ids = list(reversed(self._order))
        stop = None if limit is None else offset + limit
        return [self._runs[i] for i in ids[offset:stop]]

    def __len__(self) -> int:
        with self._lock:
            return len(self._order)
