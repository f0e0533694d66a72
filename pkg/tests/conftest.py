import socket
import threading
import time
from pathlib import Path

import pytest

from hydrotwin import datastore, learner
from hydrotwin.config import ServiceConfig
from hydrotwin.twin import GroundTruthModel, GroundTruthParams

REPO_ROOT = Path(__file__).resolve().parent.parent
SAMPLE_HISTORIAN = REPO_ROOT / "sample_data" / "historian.csv"
SAMPLE_WEATHER = REPO_ROOT / "sample_data" / "weather.csv"
GOLDEN_RECOMMENDATION = Path(__file__).resolve().parent / "golden" / "recommendation.json"


@pytest.fixture(scope="session")
def oracle_model():
    return GroundTruthModel(GroundTruthParams())


@pytest.fixture(scope="session")
def sample_dataset():
    """Training dataset assembled from the bundled historian CSV."""
    config = ServiceConfig()
    records, report = datastore.parse_historian_csv(SAMPLE_HISTORIAN.read_text())
    assert not report.errors
    from datetime import timedelta

    step = timedelta(minutes=config.step_minutes)
    horizon = max(int((r.timestamp - config.time_origin) / step) for r in records) + 1
    from hydrotwin.twin import TimeGrid

    aligned = datastore.align_to_grid(records, TimeGrid(config.time_origin, config.step_minutes, horizon))
    return datastore.build_training_dataset(aligned)


@pytest.fixture(scope="session")
def trained_model_path(tmp_path_factory, sample_dataset):
    """The model the CLI would train on the bundled data, fitted once."""
    seed = 0
    candidates = [
        learner.gbt_candidate(
            "gbt_200", learner.TrainConfig(n_trees=200, max_depth=3, learning_rate=0.1, seed=seed)
        ),
        learner.knn_candidate("knn_5", 5),
        learner.gbt_candidate("mean_predictor", learner.mean_predictor_config(seed)),
    ]
    _report, model = learner.model_selection(sample_dataset, candidates, k_folds=5, seed=seed)
    path = tmp_path_factory.mktemp("model") / "model.json"
    datastore.save_model(path, model)
    return path


class LiveServer:
    def __init__(self, app):
        import uvicorn

        self.port = self._free_port()
        self.base_url = f"http://127.0.0.1:{self.port}"
        self._server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=self.port, log_level="error")
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    @staticmethod
    def _free_port() -> int:
        s = socket.socket()
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
        s.close()
        return port

    def __enter__(self):
        self._thread.start()
        deadline = time.time() + 10
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("service did not start in time")
            time.sleep(0.02)
        return self

    def __exit__(self, *exc):
        self._server.should_exit = True
        self._thread.join(timeout=5)


@pytest.fixture
def live_server_factory():
    """Run a real uvicorn server for SSE tests; yields a context manager."""
    return LiveServer
