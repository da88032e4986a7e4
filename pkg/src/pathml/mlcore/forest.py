"""Bagged CART forests for classification and regression."""
from __future__ import annotations

import math
import warnings

import numpy as np

from .tree import DecisionTree


def _rng(seed: int, tree_idx: int) -> np.random.Generator:
    # one stream per tree, so serial and parallel fits agree
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_idx)]))


class RandomForest:
    def __init__(self, task: str = "classify", n_trees: int = 100, max_depth: int = 8, min_leaf: int = 5,
                 feature_subsample="auto", bootstrap: bool = True, seed: int = 0):
        if task not in ("classify", "regress"):
            raise ValueError(f"unknown task {task!r}")
        if n_trees < 1 or max_depth < 1 or min_leaf < 1:
            raise ValueError("n_trees, max_depth and min_leaf must be positive")
        self.task = task
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_subsample = feature_subsample
        self.bootstrap = bootstrap
        self.seed = seed
        self.classes_ = None
        self.trees = []
        self.constant = None

    def _max_features(self, n_feat: int) -> int:
        fs = self.feature_subsample
        if fs == "auto":
            fs = "sqrt" if self.task == "classify" else "third"
        if fs == "sqrt":
            return max(1, int(math.sqrt(n_feat)))
        if fs == "third":
            return max(1, n_feat // 3)
        if fs in (None, "all"):
            return n_feat
        if isinstance(fs, float):
            return max(1, int(fs * n_feat))
        return max(1, min(int(fs), n_feat))

    def fit(self, X, y) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        n, n_feat = X.shape
        self.trees = []
        self.constant = None
        if self.task == "classify":
            self.classes_, codes = np.unique(y, return_inverse=True)
            if len(self.classes_) < 2:
                warnings.warn("single-class training data; fitting a constant predictor", stacklevel=2)
                self.constant = self.classes_[0].item() if len(self.classes_) else 0
                return self
            target = codes
        else:
            target = y.astype(float)
        m = self._max_features(n_feat)
        crit = "gini" if self.task == "classify" else "mse"
        for t in range(self.n_trees):
            rng = _rng(self.seed, t)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(self.max_depth, self.min_leaf, crit, m)
            tree.fit(X[idx], target[idx], rng, n_classes=len(self.classes_) if self.classes_ is not None else None)
            self.trees.append(tree)
        return self

    def vote_fractions(self, X) -> np.ndarray:
        """(n, K) share of trees voting for each class."""
        X = np.asarray(X, dtype=float)
        if self.constant is not None:
            return np.ones((X.shape[0], 1))
        votes = np.zeros((X.shape[0], len(self.classes_)))
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            votes[rows, tree.predict(X)] += 1
        return votes / len(self.trees)

    def predict_proba(self, X, label=1) -> np.ndarray:
        """Vote fraction for class ``label`` (0 when that class was never seen)."""
        frac = self.vote_fractions(X)
        if self.constant is not None:
            return frac[:, 0] * (self.constant == label)
        hit = np.flatnonzero(self.classes_ == label)
        return frac[:, hit[0]] if hit.size else np.zeros(frac.shape[0])

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.task == "regress":
            return np.mean([t.predict(X) for t in self.trees], axis=0)
        if self.constant is not None:
            return np.full(X.shape[0], self.constant)
        return self.classes_[np.argmax(self.vote_fractions(X), axis=1)]

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "feature_subsample": self.feature_subsample,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
            "classes": None if self.classes_ is None else self.classes_.tolist(),
            "constant": self.constant,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        f = cls(d["task"], d["n_trees"], d["max_depth"], d["min_leaf"], d["feature_subsample"], d["bootstrap"],
                d["seed"])
        f.classes_ = None if d["classes"] is None else np.asarray(d["classes"])
        f.constant = d["constant"]
        f.trees = [DecisionTree.from_dict(t) for t in d["trees"]]
        return f


def fit_forest(X, y, task: str = "classify", **params) -> RandomForest:
    return RandomForest(task, **params).fit(X, y)
