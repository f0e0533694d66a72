import numpy as np
import pytest

from hydrotwin.errors import DomainError, EmptyDatasetError
from hydrotwin.learner import (
    Dataset,
    TrainConfig,
    evaluate,
    fit_gbt,
    fit_knn,
    fit_tree,
    gbt_candidate,
    knn_candidate,
    mean_predictor_config,
    model_selection,
    predict,
)
from hydrotwin.twin import GroundTruthModel


def toy_dataset():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    y = np.array([[1.0], [2.0], [7.0], [-3.0]])
    return Dataset(x, y, ("a", "b"), ("y",))


def synthetic_dataset(n=2000, seed=42):
    rng = np.random.default_rng(seed)
    x = np.column_stack(
        [
            rng.uniform(150, 180, n),
            rng.uniform(0.12, 0.20, n),
            rng.uniform(20, 40, n),
        ]
    )
    y = GroundTruthModel().predict(x)
    return Dataset(
        x, y, ("temp_setpoint_c", "dry_solids_frac", "cycle_minutes"),
        ("energy_kwh_m3", "quality_index"),
    )


class TestFitTree:
    def test_depth_zero_predicts_mean(self):
        x = np.array([[0.0], [1.0], [2.0]])
        y = np.array([1.0, 2.0, 6.0])
        tree = fit_tree(x, y, TrainConfig(max_depth=0))
        assert tree.root.is_leaf
        assert tree.predict(x) == pytest.approx([3.0, 3.0, 3.0])

    def test_two_point_split_at_midpoint(self):
        x = np.array([[0.0], [1.0]])
        y = np.array([0.0, 10.0])
        tree = fit_tree(x, y, TrainConfig(max_depth=1))
        assert tree.root.feature == 0
        assert tree.root.threshold == pytest.approx(0.5)
        assert tree.predict(np.array([[0.2], [0.9]])) == pytest.approx([0.0, 10.0])

    def test_constant_target_single_leaf(self):
        x = np.array([[0.0], [1.0], [2.0]])
        y = np.array([4.0, 4.0, 4.0])
        tree = fit_tree(x, y, TrainConfig(max_depth=5))
        assert tree.root.is_leaf

    def test_empty_dataset_rejected(self):
        with pytest.raises(EmptyDatasetError):
            fit_tree(np.empty((0, 1)), np.empty(0), TrainConfig())

    def test_gain_tie_breaks_to_lowest_feature(self):
        # identical columns: feature 0 must win the tie
        x = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        y = np.array([0.0, 0.0, 5.0, 5.0])
        tree = fit_tree(x, y, TrainConfig(max_depth=1))
        assert tree.root.feature == 0

    def test_min_samples_leaf_respected(self):
        x = np.arange(6, dtype=float).reshape(-1, 1)
        y = np.array([0.0, 0.0, 0.0, 10.0, 10.0, 10.0])
        tree = fit_tree(x, y, TrainConfig(max_depth=3, min_samples_leaf=3))
        # only the middle split leaves >= 3 points per side
        assert tree.root.threshold == pytest.approx(2.5)
        assert tree.root.left.is_leaf and tree.root.right.is_leaf


class TestGBT:
    def test_memorizes_distinct_rows(self):
        ds = toy_dataset()
        model = fit_gbt(ds, TrainConfig(n_trees=1, max_depth=5, learning_rate=1.0))
        assert predict(model, ds.features)[:, 0] == pytest.approx(ds.targets[:, 0])

    def test_training_rmse_non_increasing_at_lr_one(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, (60, 2))
        y = (np.sin(x[:, 0] * 6) + x[:, 1]).reshape(-1, 1)
        ds = Dataset(x, y, ("a", "b"), ("y",))
        errors = []
        for rounds in (1, 2, 4, 8, 16):
            model = fit_gbt(ds, TrainConfig(n_trees=rounds, max_depth=2, learning_rate=1.0))
            pred = predict(model, x)
            errors.append(float(np.sqrt(((pred - y) ** 2).mean())))
        assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))

    def test_holdout_quality_on_synthetic_ground_truth(self):
        ds = synthetic_dataset()
        train, hold = ds.subset(np.arange(1600)), ds.subset(np.arange(1600, 2000))
        model = fit_gbt(train, TrainConfig(n_trees=200, max_depth=3, learning_rate=0.1))
        report = evaluate(model, hold)
        energy_std = ds.targets[:, 0].std()
        assert report["energy_kwh_m3"]["rmse"] <= 0.10 * energy_std
        assert report["quality_index"]["rmse"] <= 0.05

    def test_mean_predictor_config_returns_init_everywhere(self):
        ds = toy_dataset()
        model = fit_gbt(ds, mean_predictor_config())
        probe = np.array([[5.0, -2.0], [0.3, 0.4]])
        assert predict(model, probe)[:, 0] == pytest.approx([1.75, 1.75])

    def test_refit_bit_identical(self):
        ds = synthetic_dataset(n=200)
        config = TrainConfig(n_trees=20, max_depth=3, learning_rate=0.2, seed=5)
        a = fit_gbt(ds, config)
        b = fit_gbt(ds, config)
        probe = ds.features[:50]
        assert np.array_equal(predict(a, probe), predict(b, probe))

    def test_single_row_rejected(self):
        ds = Dataset(np.array([[1.0]]), np.array([[1.0]]), ("a",), ("y",))
        with pytest.raises(EmptyDatasetError):
            fit_gbt(ds, TrainConfig())

    def test_piecewise_constant_within_leaf_cell(self):
        ds = toy_dataset()
        model = fit_gbt(ds, TrainConfig(n_trees=3, max_depth=2, learning_rate=0.5))
        base = predict(model, np.array([0.2, 0.1]))
        for eps in (1e-6, 1e-4):
            assert np.array_equal(base, predict(model, np.array([0.2 + eps, 0.1 - eps])))


class TestKnn:
    def test_k1_returns_training_row_target(self):
        ds = toy_dataset()
        model = fit_knn(ds, 1)
        assert predict(model, ds.features[2]) == pytest.approx(ds.targets[2])

    def test_k_equals_n_returns_global_mean(self):
        ds = toy_dataset()
        model = fit_knn(ds, ds.n_rows)
        assert predict(model, np.array([100.0, -50.0]))[0] == pytest.approx(
            ds.targets[:, 0].mean()
        )

    def test_prediction_within_target_range(self):
        ds = synthetic_dataset(n=300)
        model = fit_knn(ds, 5)
        rng = np.random.default_rng(2)
        queries = np.column_stack(
            [rng.uniform(150, 180, 50), rng.uniform(0.12, 0.2, 50), rng.uniform(20, 40, 50)]
        )
        pred = predict(model, queries)
        for j in range(2):
            assert pred[:, j].min() >= ds.targets[:, j].min() - 1e-12
            assert pred[:, j].max() <= ds.targets[:, j].max() + 1e-12

    def test_standardization_invariance(self):
        ds = synthetic_dataset(n=200)
        scaled = Dataset(
            ds.features * np.array([10.0, 1000.0, 0.01]) + np.array([5.0, -2.0, 1.0]),
            ds.targets,
            ds.feature_names,
            ds.target_names,
        )
        a = fit_knn(ds, 4)
        b = fit_knn(scaled, 4)
        q = ds.features[17]
        q_scaled = q * np.array([10.0, 1000.0, 0.01]) + np.array([5.0, -2.0, 1.0])
        assert predict(a, q) == pytest.approx(predict(b, q_scaled), abs=1e-9)

    def test_constant_feature_ignored(self):
        x = np.array([[1.0, 7.0], [2.0, 7.0], [3.0, 7.0]])
        y = np.array([[1.0], [2.0], [3.0]])
        ds = Dataset(x, y, ("a", "const"), ("y",))
        model = fit_knn(ds, 1)
        assert predict(model, np.array([2.1, 999.0]))[0] == pytest.approx(2.0)

    def test_distance_ties_break_to_lowest_index(self):
        x = np.array([[0.0], [2.0], [2.0]])
        y = np.array([[1.0], [5.0], [9.0]])
        ds = Dataset(x, y, ("a",), ("y",))
        model = fit_knn(ds, 1)
        # query equidistant rows 1 and 2: stable sort keeps index 1
        assert predict(model, np.array([2.0]))[0] == pytest.approx(5.0)

    def test_k_bounds(self):
        ds = toy_dataset()
        with pytest.raises(DomainError):
            fit_knn(ds, 0)
        with pytest.raises(DomainError):
            fit_knn(ds, 5)


class TestEvaluate:
    def test_perfect_predictions(self):
        ds = toy_dataset()
        model = fit_gbt(ds, TrainConfig(n_trees=1, max_depth=5, learning_rate=1.0))
        report = evaluate(model, ds)
        assert report["y"]["rmse"] == pytest.approx(0.0, abs=1e-12)
        assert report["y"]["r2"] == pytest.approx(1.0)

    def test_mean_predictor_r2_zero_on_training_targets(self):
        ds = toy_dataset()
        model = fit_gbt(ds, mean_predictor_config())
        report = evaluate(model, ds)
        assert report["y"]["r2"] == pytest.approx(0.0, abs=1e-12)

    def test_constant_targets_omit_r2(self):
        ds = toy_dataset()
        model = fit_gbt(ds, mean_predictor_config())
        const = Dataset(ds.features, np.full((4, 1), 2.0), ds.feature_names, ds.target_names)
        report = evaluate(model, const)
        assert report["y"]["r2"] is None


class TestModelSelection:
    def test_gbt_outranks_mean_predictor(self):
        ds = synthetic_dataset(n=400)
        candidates = [
            gbt_candidate("mean", mean_predictor_config()),
            gbt_candidate("gbt", TrainConfig(n_trees=60, max_depth=3, learning_rate=0.2)),
        ]
        report, best = model_selection(ds, candidates, k_folds=4, seed=0)
        assert report.best_name == "gbt"
        assert report.rankings[0][0] == "gbt"

    def test_single_candidate_trivially_best(self):
        ds = toy_dataset()
        report, best = model_selection(ds, [knn_candidate("knn", 2)], k_folds=2, seed=1)
        assert report.best_name == "knn"

    def test_same_seed_same_ranking(self):
        ds = synthetic_dataset(n=150)
        candidates = [
            knn_candidate("knn3", 3),
            gbt_candidate("gbt", TrainConfig(n_trees=25, max_depth=2, learning_rate=0.3)),
        ]
        a, _ = model_selection(ds, candidates, k_folds=3, seed=9)
        b, _ = model_selection(ds, candidates, k_folds=3, seed=9)
        assert a.rankings == b.rankings

    def test_too_few_rows(self):
        ds = toy_dataset()
        with pytest.raises(EmptyDatasetError):
            model_selection(ds, [knn_candidate("knn", 1)], k_folds=5, seed=0)


class TestDatasetValidation:
    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            Dataset(np.array([[np.nan]]), np.array([[1.0]]), ("a",), ("y",))

    def test_name_mismatch_rejected(self):
        from hydrotwin.errors import DimensionError

        with pytest.raises(DimensionError):
            Dataset(np.ones((2, 2)), np.ones((2, 1)), ("a",), ("y",))
