"""Gradient-boosted regression trees under squared loss."""
from __future__ import annotations

import numpy as np

from .forest import RandomForest
from .tree import DecisionTree


class GradientBoostingRegressor:
    def __init__(self, n_rounds: int = 100, learning_rate: float = 0.1, max_depth: int = 3, min_leaf: int = 5):
        if n_rounds < 1 or not 0 < learning_rate <= 1:
            raise ValueError("n_rounds must be positive and learning_rate in (0, 1]")
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.init = 0.0
        self.trees = []

    def fit(self, X, y) -> "GradientBoostingRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.init = float(y.mean())
        pred = np.full(y.shape, self.init)
        self.trees = []
        for _ in range(self.n_rounds):
            resid = y - pred
            if np.all(resid == 0):
                break
            tree = DecisionTree(self.max_depth, self.min_leaf, "mse").fit(X, resid)
            pred = pred + self.learning_rate * tree.predict(X)
            self.trees.append(tree)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], self.init)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def to_dict(self) -> dict:
        return {
            "n_rounds": self.n_rounds,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "init": self.init,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GradientBoostingRegressor":
        m = cls(d["n_rounds"], d["learning_rate"], d["max_depth"], d["min_leaf"])
        m.init = d["init"]
        m.trees = [DecisionTree.from_dict(t) for t in d["trees"]]
        return m


def fit_tree_ensemble_regressor(X, y, kind: str = "boosting", seed: int = 0, **params):
    """Non-linear regressor: boosted depth-3 trees by default, or a regression forest."""
    if kind == "boosting":
        return GradientBoostingRegressor(**params).fit(X, y)
    if kind == "forest":
        return RandomForest("regress", seed=seed, **params).fit(X, y)
    raise ValueError(f"unknown ensemble kind {kind!r}")
