"""Random-forest regression built on a small numpy CART.

Trees split on ``x[f] <= t`` with ``t`` a midpoint between consecutive
distinct values, choosing the split with the largest reduction in squared
error over a random subset of features.  Each tree draws from its own
``PCG64`` stream spawned from the forest seed, so a model depends only on
the seed and never on how many worker processes trained it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.model_selection import KFold, ParameterGrid
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

FORMAT = "proofsts-forest"
VERSION = 1
_LEAF = -1


class ModelError(ValueError):
    pass


def resolve_max_features(value, n_features: int) -> int:
    if value in (None, "all"):
        k = n_features
    elif value == "third":
        k = math.ceil(n_features / 3)
    elif value == "sqrt":
        k = math.ceil(math.sqrt(n_features))
    elif isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        k = int(value)
    elif isinstance(value, float) and 0.0 < value <= 1.0:
        k = math.ceil(value * n_features)
    else:
        raise ValueError(f"bad features_per_split: {value!r}")
    return max(1, min(n_features, k))


@dataclass
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self):
        return len(self.value)

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != _LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            active = self.feature[node] != _LEAF
            if not active.any():
                return self.value[node]
            f = np.where(active, self.feature[node], 0)
            go_left = X[rows, f] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(active, nxt, node)

    def leaf_sizes(self):
        return self.n_samples[self.feature == _LEAF]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=float),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=float),
            np.array(d["n_samples"], dtype=np.int64),
        )


def _best_split(X, y, features, min_samples_leaf):
    """Best ``(feature, threshold)`` over ``features`` or None.

    Maximizes ``S_l^2/n_l + S_r^2/n_r``, which is the same as minimizing the
    children's summed squared error.  Ties (up to rounding) go to the
    earlier feature in ``features`` and then to the smaller threshold.
    """
    n = len(y)
    if n < 2 * min_samples_leaf:
        return None
    Xs = X[:, features]
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = np.take_along_axis(Xs, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)[:-1]
    total = y.sum()
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    score = csum**2 / n_left + (total - csum) ** 2 / n_right
    valid = xs[1:] > xs[:-1]
    valid &= (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf).T
    # summation order shifts equal scores by a few ulps; treat those as ties
    best = score.max()
    k = int(np.argmax(score >= best - 1e-12 * max(1.0, abs(best))))
    fi, pos = divmod(k, n - 1)
    gain = score[fi, pos] - total**2 / n
    if not gain > 1e-12 * max(1.0, float(np.dot(y, y))):
        return None
    lo, hi = xs[pos, fi], xs[pos + 1, fi]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(features[fi]), float(thr)


def build_tree(X, y, rng: Optional[np.random.Generator], max_depth=None, min_samples_leaf=1, max_features=None) -> RegressionTree:
    n_features = X.shape[1]
    k = resolve_max_features(max_features, n_features)
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def grow(idx, depth):
        node = len(value)
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(_LEAF)
        right.append(_LEAF)
        value.append(float(y[idx].mean()))
        count.append(len(idx))
        if max_depth is not None and depth >= max_depth:
            return node
        if k == n_features:
            cand = np.arange(n_features)
        else:
            cand = np.sort(rng.choice(n_features, size=k, replace=False))
        split = _best_split(X[idx], y[idx], cand, min_samples_leaf)
        if split is None:
            return node
        f, t = split
        mask = X[idx, f] <= t
        feature[node], threshold[node] = f, t
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return RegressionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=float),
        np.array(count, dtype=np.int64),
    )


def _fit_one(X, y, seed_seq, bootstrap, max_depth, min_samples_leaf, max_features):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    if bootstrap:
        rows = rng.integers(0, len(y), size=len(y))
        X, y = X[rows], y[rows]
    return build_tree(X, y, rng, max_depth, min_samples_leaf, max_features)


class ForestRegressor(RegressorMixin, BaseEstimator):
    """Bagged regression trees; the prediction is the mean over trees."""

    def __init__(
        self,
        n_trees=100,
        max_depth=None,
        min_samples_leaf=1,
        features_per_split="third",
        bootstrap=True,
        random_state=0,
        n_jobs=1,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y, feature_names=None):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if len(y) < 2:
            raise ValueError("need at least two training rows")
        if self.n_trees < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_trees and min_samples_leaf must be positive")
        seeds = np.random.SeedSequence(self.random_state).spawn(self.n_trees)
        self.trees_ = Parallel(n_jobs=self.n_jobs)(
            delayed(_fit_one)(X, y, s, self.bootstrap, self.max_depth, self.min_samples_leaf, self.features_per_split)
            for s in seeds
        )
        self.n_features_in_ = X.shape[1]
        self.feature_names_ = list(feature_names) if feature_names is not None else None
        self.schema_hash_ = _names_hash(self.feature_names_)
        return self

    def predict(self, X, schema_hash=None):
        check_is_fitted(self, "trees_")
        if schema_hash is not None and schema_hash != self.schema_hash_:
            raise ModelError(f"feature schema {schema_hash} does not match the model's {self.schema_hash_}")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ModelError(f"model expects {self.n_features_in_} features, got {X.shape[1]}")
        return np.mean([t.predict(X) for t in self.trees_], axis=0)

    def to_dict(self):
        check_is_fitted(self, "trees_")
        return {
            "format": FORMAT,
            "version": VERSION,
            # n_jobs only affects speed, so it stays out of the file
            "params": {k: v for k, v in self.get_params().items() if k != "n_jobs"},
            "n_features": self.n_features_in_,
            "feature_names": self.feature_names_,
            "schema_hash": self.schema_hash_,
            "trees": [t.to_dict() for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, d) -> "ForestRegressor":
        if d.get("format") != FORMAT or d.get("version") != VERSION:
            raise ModelError("not a model file of a supported version")
        model = cls(**d["params"])
        model.trees_ = [RegressionTree.from_dict(t) for t in d["trees"]]
        model.n_features_in_ = d["n_features"]
        model.feature_names_ = d["feature_names"]
        model.schema_hash_ = d["schema_hash"]
        return model

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path, schema_hash=None) -> "ForestRegressor":
        with open(path, encoding="utf-8") as fh:
            model = cls.from_dict(json.load(fh))
        if schema_hash is not None and schema_hash != model.schema_hash_:
            raise ModelError(f"feature schema {schema_hash} does not match the model's {model.schema_hash_}")
        return model


def _names_hash(names):
    if names is None:
        return None
    return hashlib.sha256(json.dumps(list(names)).encode()).hexdigest()[:16]


@dataclass
class GridResult:
    best_params: Dict
    scores: List[Dict]


def grid_search(X, y, grid, k_folds=5, seed=0, n_jobs=1) -> GridResult:
    """Exhaustive search by k-fold cross-validated MSE.

    Points are visited in :class:`~sklearn.model_selection.ParameterGrid`
    order and the first point with the lowest mean MSE wins.
    """
    X, y = check_X_y(X, y, dtype=float, y_numeric=True)
    points = list(ParameterGrid(grid))
    if not points or not grid:
        raise ValueError("empty parameter grid")
    if k_folds < 2:
        raise ValueError("k_folds must be at least 2")
    folds = list(KFold(n_splits=min(k_folds, len(y)), shuffle=True, random_state=seed).split(X))
    scores = []
    best, best_mse = None, math.inf
    for params in points:
        errs = []
        for train, test in folds:
            model = ForestRegressor(**params, random_state=seed, n_jobs=n_jobs).fit(X[train], y[train])
            errs.append(float(np.mean((model.predict(X[test]) - y[test]) ** 2)))
        mse = float(np.mean(errs))
        scores.append({"params": params, "mse": mse})
        if mse < best_mse:
            best, best_mse = params, mse
    return GridResult(dict(best), scores)
