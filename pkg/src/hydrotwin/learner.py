"""From-scratch multi-output regression.

CART regression trees with exact greedy variance-reduction splits, gradient
boosted tree ensembles (squared loss, one ensemble per output), and
k-nearest-neighbours on standardized features, plus a cross-validated
model-selection harness. Everything is deterministic given its config/seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, EmptyDatasetError


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...]

    def __post_init__(self) -> None:
        f = np.asarray(self.features, dtype=float)
        t = np.asarray(self.targets, dtype=float)
        if f.ndim != 2 or t.ndim != 2:
            raise DimensionError("features and targets must be 2-D")
        if f.shape[0] != t.shape[0]:
            raise DimensionError("feature and target row counts differ")
        if f.shape[0] < 1:
            raise EmptyDatasetError("dataset has no rows")
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(t)):
            raise DomainError("dataset contains non-finite entries")
        if len(self.feature_names) != f.shape[1] or len(self.target_names) != t.shape[1]:
            raise DimensionError("names do not match matrix dimensions")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "targets", t)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            self.features[idx], self.targets[idx], self.feature_names, self.target_names
        )


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise DomainError("n_trees must be >= 1")
        if self.max_depth < 0:
            raise DomainError("max_depth must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise DomainError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise DomainError("min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (value)."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class RegressionTree:
    root: TreeNode

    def predict(self, features: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        out = np.empty(x.shape[0])

        def fill(node: TreeNode, idx: np.ndarray) -> None:
            if node.is_leaf:
                out[idx] = node.value
                return
            go_left = x[idx, node.feature] <= node.threshold
            fill(node.left, idx[go_left])
            fill(node.right, idx[~go_left])

        fill(self.root, np.arange(x.shape[0]))
        return out

    def depth(self) -> int:
        def _d(node: TreeNode) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(_d(node.left), _d(node.right))

        return _d(self.root)


def fit_tree(features: np.ndarray, residuals: np.ndarray, config: TrainConfig) -> RegressionTree:
    """Greedy CART on a single target column.

    Candidate thresholds are midpoints between consecutive distinct sorted
    feature values; gain ties break to the lowest feature index then lowest
    threshold; leaves predict the residual mean. Stops at max_depth,
    min_samples_leaf, zero variance, or no admissible split.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(residuals, dtype=float)
    if x.ndim != 2:
        raise DimensionError("features must be 2-D")
    if x.shape[0] == 0:
        raise EmptyDatasetError("cannot fit a tree on an empty dataset")
    if x.shape[0] != y.shape[0]:
        raise DimensionError("feature and residual row counts differ")

    msl = config.min_samples_leaf

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        sub_y = y[idx]
        n = idx.size
        mean = float(sub_y.mean())
        if depth >= config.max_depth or n < 2 * msl or np.all(sub_y == sub_y[0]):
            return TreeNode(value=mean)

        parent_sse = float(((sub_y - mean) ** 2).sum())
        best_gain = -np.inf
        best_feature = -1
        best_threshold = 0.0
        for f in range(x.shape[1]):
            col = x[idx, f]
            order = np.argsort(col, kind="stable")
            xs = col[order]
            ys = sub_y[order]
            # split after position k: left = first k points, k in [msl, n-msl]
            csum = np.cumsum(ys)
            csq = np.cumsum(ys * ys)
            ks = np.arange(msl, n - msl + 1)
            ks = ks[xs[ks - 1] < xs[ks]]  # only between distinct values
            if ks.size == 0:
                continue
            left_sum = csum[ks - 1]
            left_sq = csq[ks - 1]
            right_sum = csum[-1] - left_sum
            right_sq = csq[-1] - left_sq
            sse = (
                left_sq
                - left_sum * left_sum / ks
                + right_sq
                - right_sum * right_sum / (n - ks)
            )
            gains = parent_sse - sse
            j = int(np.argmax(gains))  # first max = lowest threshold
            if gains[j] > best_gain:
                best_gain = float(gains[j])
                best_feature = f
                k = int(ks[j])
                best_threshold = (xs[k - 1] + xs[k]) / 2.0

        if best_feature < 0:
            return TreeNode(value=mean)

        go_left = x[idx, best_feature] <= best_threshold
        left = build(idx[go_left], depth + 1)
        right = build(idx[~go_left], depth + 1)
        return TreeNode(best_feature, best_threshold, left, right)

    root = build(np.arange(x.shape[0]), 0)
    return RegressionTree(root)


@dataclass(frozen=True)
class GBTOutput:
    name: str
    init_value: float
    trees: tuple[RegressionTree, ...]


@dataclass(frozen=True)
class GBTModel:
    """Per-output boosted ensembles: prediction = init + lr * sum(tree(x))."""

    outputs: tuple[GBTOutput, ...]
    config: TrainConfig
    feature_names: tuple[str, ...]

    @property
    def target_names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.outputs)

    def predict(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 1
        rows = np.atleast_2d(x)
        if rows.shape[1] != len(self.feature_names):
            raise DimensionError(
                f"expected {len(self.feature_names)} features, got {rows.shape[1]}"
            )
        out = np.empty((rows.shape[0], len(self.outputs)))
        for j, ens in enumerate(self.outputs):
            pred = np.full(rows.shape[0], ens.init_value)
            for tree in ens.trees:
                pred = pred + self.config.learning_rate * tree.predict(rows)
            out[:, j] = pred
        return out[0] if single else out


def fit_gbt(dataset: Dataset, config: TrainConfig) -> GBTModel:
    """Boost squared-error residuals, one ensemble per target column."""
    if dataset.n_rows < 2:
        raise EmptyDatasetError("need at least 2 rows to boost")
    outputs = []
    for j, name in enumerate(dataset.target_names):
        y = dataset.targets[:, j]
        init = float(y.mean())
        current = np.full(dataset.n_rows, init)
        trees = []
        for _ in range(config.n_trees):
            tree = fit_tree(dataset.features, y - current, config)
            current = current + config.learning_rate * tree.predict(dataset.features)
            trees.append(tree)
        outputs.append(GBTOutput(name, init, tuple(trees)))
    return GBTModel(tuple(outputs), config, dataset.feature_names)


def mean_predictor_config(seed: int = 0) -> TrainConfig:
    """Depth-0 single-round boosting collapses to the per-output target mean."""
    return TrainConfig(n_trees=1, max_depth=0, learning_rate=1.0, seed=seed)


@dataclass(frozen=True)
class KnnModel:
    """k-NN on standardized features; constant features are ignored."""

    k: int
    feature_mean: np.ndarray
    feature_std: np.ndarray
    standardized_features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...]

    def predict(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 1
        rows = np.atleast_2d(x)
        if rows.shape[1] != self.feature_mean.shape[0]:
            raise DimensionError(
                f"expected {self.feature_mean.shape[0]} features, got {rows.shape[1]}"
            )
        active = self.feature_std > 0
        scale = np.where(active, self.feature_std, 1.0)
        q = (rows - self.feature_mean) / scale
        q[:, ~active] = 0.0
        out = np.empty((rows.shape[0], self.targets.shape[1]))
        for i, row in enumerate(q):
            d2 = ((self.standardized_features - row) ** 2).sum(axis=1)
            # stable sort: distance ties resolve to the lowest training index
            nearest = np.argsort(d2, kind="stable")[: self.k]
            out[i] = self.targets[nearest].mean(axis=0)
        return out[0] if single else out


def fit_knn(dataset: Dataset, k: int) -> KnnModel:
    if k < 1 or k > dataset.n_rows:
        raise DomainError(f"k must be in [1, {dataset.n_rows}], got {k}")
    mean = dataset.features.mean(axis=0)
    std = dataset.features.std(axis=0)
    active = std > 0
    scale = np.where(active, std, 1.0)
    standardized = (dataset.features - mean) / scale
    standardized[:, ~active] = 0.0
    return KnnModel(
        k=k,
        feature_mean=mean,
        feature_std=std,
        standardized_features=standardized,
        targets=dataset.targets.copy(),
        feature_names=dataset.feature_names,
        target_names=dataset.target_names,
    )


def predict(model, features: np.ndarray) -> np.ndarray:
    """Uniform prediction entry point for any fitted model."""
    return model.predict(features)


def evaluate(model, test: Dataset) -> dict[str, dict[str, float | None]]:
    """Per-output RMSE and R^2 (R^2 omitted when the target is constant)."""
    if test.n_rows == 0:
        raise EmptyDatasetError("empty test set")
    pred = np.atleast_2d(model.predict(test.features))
    if pred.shape != test.targets.shape:
        raise DimensionError("prediction and target shapes differ")
    report: dict[str, dict[str, float | None]] = {}
    for j, name in enumerate(test.target_names):
        err = pred[:, j] - test.targets[:, j]
        sse = float((err**2).sum())
        rmse = float(np.sqrt(sse / test.n_rows))
        sst = float(((test.targets[:, j] - test.targets[:, j].mean()) ** 2).sum())
        r2 = 1.0 - sse / sst if sst > 0 else None
        report[name] = {"rmse": rmse, "r2": r2}
    return report


@dataclass(frozen=True)
class Candidate:
    name: str
    fit: Callable[[Dataset], object] = field(compare=False)


def gbt_candidate(name: str, config: TrainConfig) -> Candidate:
    return Candidate(name, lambda ds: fit_gbt(ds, config))


def knn_candidate(name: str, k: int) -> Candidate:
    return Candidate(name, lambda ds: fit_knn(ds, min(k, ds.n_rows)))


@dataclass(frozen=True)
class SelectionReport:
    """Cross-validation shootout: candidates ranked by mean RMSE."""

    rankings: tuple[tuple[str, float], ...]
    per_output_rmse: dict[str, dict[str, float]]
    best_name: str
    k_folds: int
    seed: int


def model_selection(
    dataset: Dataset, candidates: Sequence[Candidate], k_folds: int, seed: int
) -> tuple[SelectionReport, object]:
    """Rank candidates by k-fold CV RMSE (mean over outputs); refit the winner.

    Fold assignment is a seeded permutation; ties keep candidate list order.
    """
    if k_folds < 2:
        raise DomainError("k_folds must be >= 2")
    if dataset.n_rows < k_folds:
        raise EmptyDatasetError(
            f"need at least {k_folds} rows for {k_folds}-fold CV, got {dataset.n_rows}"
        )
    if not candidates:
        raise DomainError("no candidates supplied")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.n_rows)
    folds = np.array_split(perm, k_folds)

    scores: list[tuple[str, float]] = []
    per_output: dict[str, dict[str, float]] = {}
    for cand in candidates:
        fold_rmse = np.zeros((k_folds, len(dataset.target_names)))
        for i, fold in enumerate(folds):
            train_idx = np.setdiff1d(perm, fold, assume_unique=True)
            model = cand.fit(dataset.subset(train_idx))
            report = evaluate(model, dataset.subset(fold))
            fold_rmse[i] = [report[t]["rmse"] for t in dataset.target_names]
        mean_by_output = fold_rmse.mean(axis=0)
        per_output[cand.name] = {
            t: float(v) for t, v in zip(dataset.target_names, mean_by_output)
        }
        scores.append((cand.name, float(mean_by_output.mean())))

    order = sorted(range(len(candidates)), key=lambda i: (scores[i][1], i))
    rankings = tuple(scores[i] for i in order)
    best = candidates[order[0]]
    return (
        SelectionReport(rankings, per_output, best.name, k_folds, seed),
        best.fit(dataset),
    )
