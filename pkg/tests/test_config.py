import json

import pytest

from hydrotwin.config import ServiceConfig, config_from_dict, load_config
from hydrotwin.errors import ParseError


class TestLoadConfig:
    def test_defaults_without_file(self, monkeypatch):
        monkeypatch.delenv("HYDROTWIN_CONFIG", raising=False)
        monkeypatch.delenv("HYDROTWIN_PORT", raising=False)
        config = load_config()
        assert config.port == 8080
        assert config.omega == 0.1
        assert len(config.reactors) == 3

    def test_env_config_file(self, tmp_path, monkeypatch):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({
            "omega": 0.5,
            "target_level_pct": 55.0,
            "reactors": [
                {"id": 1, "rate_pct_per_step": 4.0, "min_up_steps": 1, "min_down_steps": 1},
            ],
            "policy": {"q_min": 0.85},
            "level_bounds": [10.0, 95.0],
            "time_origin": "2024-06-01T00:00:00Z",
        }))
        monkeypatch.setenv("HYDROTWIN_CONFIG", str(path))
        config = load_config()
        assert config.omega == 0.5
        assert config.target_level_pct == 55.0
        assert len(config.reactors) == 1
        assert config.policy.q_min == 0.85
        assert config.level_bounds == (10.0, 95.0)
        assert config.time_origin.year == 2024 and config.time_origin.month == 6

    def test_env_port_override(self, tmp_path, monkeypatch):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"port": 9000}))
        monkeypatch.setenv("HYDROTWIN_CONFIG", str(path))
        monkeypatch.setenv("HYDROTWIN_PORT", "9999")
        assert load_config().port == 9999

    def test_malformed_config_rejected(self, tmp_path, monkeypatch):
        path = tmp_path / "config.json"
        path.write_text("{broken")
        monkeypatch.setenv("HYDROTWIN_CONFIG", str(path))
        with pytest.raises(ParseError):
            load_config()

    def test_planner_config_echoes_overrides(self):
        config = ServiceConfig()
        planner = config.planner_config(horizon=5, omega=2.0)
        assert planner.horizon_steps == 5
        assert planner.omega == 2.0
        assert planner.reactors == config.reactors

    def test_grid_and_ground_truth_from_dict(self):
        config = config_from_dict({
            "grid": {"temp": [150, 170, 5], "dry_solids": [0.12, 0.16, 0.02], "cycle": [20, 30, 5]},
            "ground_truth": {"e0": 40.0, "noise_sigma_energy": 1.0, "seed": 3},
            "inflow": {"base_pct": 4.0, "noise_sigma": 0.0},
        })
        assert config.grid.cardinality() == 5 * 3 * 3
        assert config.ground_truth.e0 == 40.0
        assert config.inflow.base_pct == 4.0
