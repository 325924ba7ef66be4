"""Random forest of Gini decision trees over integer feature vectors.

Trees are stored as flat node arrays.  Internal nodes send a sample left when
``x[feature] <= threshold``; leaves (``feature == -1``) hold the success
fraction of the training rows that reached them.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from ._accel import max_threads
from .errors import DegenerateData, ParamMismatch
from .features import DEFAULT_BINS, FeatureVector


@dataclass(eq=False)
class TrainingSet:
    X: np.ndarray
    y: np.ndarray
    params: tuple = DEFAULT_BINS

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.int64).reshape(len(self.y), -1) if len(self.y) else \
            np.zeros((0, self.params[0] * self.params[1]), dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if self.X.shape[1] != self.params[0] * self.params[1]:
            raise ParamMismatch("row length does not match feature params")

    def __len__(self):
        return len(self.y)

    def subset(self, idx):
        return TrainingSet(self.X[idx], self.y[idx], self.params)


@dataclass(eq=False)
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def depth(self):
        def rec(i):
            return 0 if self.feature[i] < 0 else 1 + max(rec(self.left[i]), rec(self.right[i]))
        return rec(0)

    def predict(self, X):
        X = np.atleast_2d(X)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                return self.value[node]
            go_left = X[rows, np.maximum(f, 0)] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(internal, nxt, node)

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(), "left": self.left.tolist(),
                "right": self.right.tolist(), "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=float))


def node_gini(y):
    n = len(y)
    pos = int(y.sum())
    return 2.0 * pos * (n - pos) / n / n if n else 0.0


def build_tree(X, y, max_depth=5, features_per_split=5, rng=None) -> DecisionTree:
    """Depth-first growth; a node splits only if weighted Gini strictly drops."""
    rng = rng if rng is not None else np.random.default_rng(0)
    n_feat = X.shape[1]
    k = min(features_per_split, n_feat)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            lst.append(v)
        return len(feature) - 1

    def grow(idx, depth):
        node = new_node()
        yy = y[idx]
        value[node] = float(yy.mean())
        pos = int(yy.sum())
        if depth >= max_depth or len(idx) < 2 or pos == 0 or pos == len(idx):
            return node
        chosen = rng.choice(n_feat, size=k, replace=False)
        Xs = np.ascontiguousarray(X[idx])
        f, t, g = kernels.best_split(Xs, yy, np.sort(chosen).astype(np.int64))
        if f < 0 and k < n_feat:
            rest = np.setdiff1d(np.arange(n_feat), chosen).astype(np.int64)
            f, t, g = kernels.best_split(Xs, yy, rest)
        if f < 0 or not g < node_gini(yy):
            return node
        mask = Xs[:, f] <= t
        feature[node], threshold[node] = int(f), float(t)
        l_child = grow(idx[mask], depth + 1)
        r_child = grow(idx[~mask], depth + 1)
        left[node], right[node] = l_child, r_child
        return node

    grow(np.arange(len(y)), 0)
    return DecisionTree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                        np.array(right, dtype=np.int64), np.array(value))


@dataclass(eq=False)
class RandomForest:
    trees: list
    params: tuple = DEFAULT_BINS
    n_trees: int = 200
    max_depth: int = 5
    bootstrap_frac: float = 0.7
    features_per_split: int = 5
    seed: int = 0
    replace: bool = False
    meta: dict = field(default_factory=dict)

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.int64))
        if X.shape[1] != self.params[0] * self.params[1]:
            raise ParamMismatch(f"expected {self.params[0] * self.params[1]} features, got {X.shape[1]}")
        acc = np.zeros(len(X))
        for t in self.trees:
            acc += t.predict(X)
        return acc / len(self.trees)

    def to_dict(self):
        return {"version": 1, "params": list(self.params), "n_trees": self.n_trees, "max_depth": self.max_depth,
                "bootstrap_frac": self.bootstrap_frac, "features_per_split": self.features_per_split,
                "seed": self.seed, "replace": self.replace, "meta": self.meta,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != 1:
            raise ValueError("unsupported model version")
        return cls([DecisionTree.from_dict(t) for t in d["trees"]], tuple(d["params"]), d["n_trees"], d["max_depth"],
                   d["bootstrap_frac"], d["features_per_split"], d["seed"], d["replace"], d.get("meta", {}))


def save_forest(path, forest):
    Path(path).write_text(json.dumps(forest.to_dict()))


def load_forest(path):
    return RandomForest.from_dict(json.loads(Path(path).read_text()))


def train(data: TrainingSet, n_trees=200, max_depth=5, bootstrap_frac=0.7, features_per_split=5, seed=0,
          replace=False, threads=1) -> RandomForest:
    m = len(data)
    if m < 2:
        raise DegenerateData("need at least two training rows")
    if data.y.min() == data.y.max():
        raise DegenerateData("training data contains a single class")
    size = m if replace and bootstrap_frac >= 1 else min(m, max(1, math.ceil(bootstrap_frac * m - 1e-9)))

    def one(k):
        rng = np.random.default_rng([int(seed), k])
        idx = rng.choice(m, size=size, replace=replace)
        return build_tree(data.X[idx], data.y[idx], max_depth, features_per_split, rng)

    workers = max_threads(threads)
    if workers <= 1:
        trees = [one(k) for k in range(n_trees)]
    else:
        with ThreadPoolExecutor(workers) as ex:
            trees = list(ex.map(one, range(n_trees)))
    return RandomForest(trees, tuple(data.params), n_trees, max_depth, bootstrap_frac, features_per_split, int(seed),
                        replace)


def predict(forest: RandomForest, f) -> float:
    """Mean leaf success fraction over all trees."""
    if isinstance(f, FeatureVector):
        if tuple(f.params) != tuple(forest.params):
            raise ParamMismatch(f"feature params {f.params} differ from model params {forest.params}")
        x = f.counts
    else:
        x = np.asarray(f)
    return float(forest.predict_proba(x[None, :])[0])


class ConstantModel:
    """Fallback used by the learning curve when a subsample holds one class."""

    def __init__(self, p):
        self.p = float(p)

    def predict_proba(self, X):
        return np.full(len(np.atleast_2d(X)), self.p)


def accuracy_curve(pool: TrainingSet, sizes, holdout: TrainingSet, repeats=10, seed=0, **train_kw):
    """Mean held-out 0/1 accuracy (threshold 0.5) per training-set size."""
    out = []
    for size in sizes:
        accs = []
        for r in range(repeats):
            rng = np.random.default_rng([int(seed), int(size), r])
            idx = rng.choice(len(pool), size=min(size, len(pool)), replace=False)
            sub = pool.subset(idx)
            try:
                model = train(sub, seed=int(seed) * 1000 + r, **train_kw)
            except DegenerateData:
                model = ConstantModel(sub.y.mean() if len(sub) else 0.0)
            pred = model.predict_proba(holdout.X) >= 0.5
            accs.append(float(np.mean(pred == (holdout.y == 1))))
        out.append((int(size), float(np.mean(accs))))
    return out
