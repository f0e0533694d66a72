import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from hydrotwin.cli import main
from hydrotwin.config import ServiceConfig
from hydrotwin.datastore import historian_records_to_csv, weather_records_to_csv
from hydrotwin.sampledata import generate_sample_run

from conftest import SAMPLE_HISTORIAN, SAMPLE_WEATHER


@pytest.fixture(scope="module")
def small_data(tmp_path_factory):
    """Three days of generated plant data; enough for 96-step seasonality."""
    root = tmp_path_factory.mktemp("small")
    run = generate_sample_run(ServiceConfig(), history_days=3, future_weather_days=1, seed=21)
    hist = root / "historian.csv"
    weather = root / "weather.csv"
    hist.write_text(historian_records_to_csv(run.historian))
    weather.write_text(weather_records_to_csv(run.weather))
    return hist, weather


def run_cli(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


class TestIngestCommand:
    def test_historian_summary(self, small_data):
        hist, _ = small_data
        result = run_cli("ingest", "--file", str(hist))
        assert result.exit_code == 0
        body = json.loads(result.output)
        assert body["kind"] == "historian"
        assert body["accepted_rows"] > 0
        assert body["row_errors"] == []

    def test_weather_autodetect(self, small_data):
        _, weather = small_data
        body = json.loads(run_cli("ingest", "--file", str(weather)).output)
        assert body["kind"] == "weather"

    def test_unknown_header_fails(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        result = CliRunner().invoke(main, ["ingest", "--file", str(bad)])
        assert result.exit_code != 0
        assert "unrecognized header" in result.output

    def test_missing_file_fails(self):
        result = CliRunner().invoke(main, ["ingest", "--file", "/nope/missing.csv"])
        assert result.exit_code != 0


class TestTrainAndPlan:
    def test_train_then_plan_seasonal(self, small_data, tmp_path):
        hist, _ = small_data
        model_path = tmp_path / "model.json"
        result = run_cli("train", "--data", str(hist), "--out", str(model_path), "--folds", "3")
        assert result.exit_code == 0
        report = json.loads(result.output)
        assert report["best"] in {"gbt_200", "knn_5"}
        assert model_path.exists()
        assert len(report["rankings"]) == 3

        plan_result = run_cli(
            "plan",
            "--horizon", "8",
            "--model", str(model_path),
            "--data", str(hist),
            "--forecast", "seasonal_naive",
        )
        assert plan_result.exit_code == 0
        rec = json.loads(plan_result.output)
        assert len(rec["schedule"]) == 3
        assert len(rec["schedule"][0]) == 8
        assert len(rec["op_points"]) == 8

    def test_plan_feature_model_requires_weather(self, small_data, tmp_path):
        hist, _ = small_data
        model_path = tmp_path / "model.json"
        run_cli("train", "--data", str(hist), "--out", str(model_path), "--folds", "3")
        result = CliRunner().invoke(
            main, ["plan", "--model", str(model_path), "--data", str(hist)]
        )
        assert result.exit_code != 0
        assert "--weather" in result.output

    def test_plan_without_model_reports_untrained(self, small_data):
        hist, _ = small_data
        result = CliRunner().invoke(
            main,
            ["plan", "--model", "/nope/model.json", "--data", str(hist), "--forecast", "seasonal_naive"],
        )
        assert result.exit_code != 0
        assert "model not trained" in result.output

    def test_plan_deterministic_output(self, small_data, tmp_path):
        hist, weather = small_data
        model_path = tmp_path / "model.json"
        run_cli("train", "--data", str(hist), "--out", str(model_path), "--folds", "3")
        args = (
            "plan", "--horizon", "8", "--model", str(model_path),
            "--data", str(hist), "--weather", str(weather),
        )
        assert run_cli(*args).output == run_cli(*args).output


class TestSimulateCommand:
    def test_writes_episode_csvs(self, tmp_path):
        out = tmp_path / "episodes"
        result = run_cli("simulate", "--episodes", "2", "--steps", "12", "--out", str(out))
        assert result.exit_code == 0
        files = sorted(out.glob("episode_*.csv"))
        assert len(files) == 2
        lines = files[0].read_text().splitlines()
        assert lines[0].startswith("step,timestamp,inflow_pct,level_pct,reactor1")
        assert len(lines) == 13


class TestEvaluateCommand:
    def test_json_report(self):
        result = run_cli("evaluate", "--episodes", "2", "--steps", "24", "--json")
        assert result.exit_code == 0
        report = json.loads(result.output)
        assert len(report["episodes"]) == 2
        assert report["aggregate_rms_plan"] <= report["aggregate_rms_baseline"]

    def test_table_output(self):
        result = run_cli("evaluate", "--episodes", "1", "--steps", "24")
        assert result.exit_code == 0
        assert "aggregate rms" in result.output
