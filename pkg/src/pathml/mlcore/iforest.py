"""Isolation forest anomaly scores, s(x) = 2^(-E[h(x)] / c(n))."""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ..errors import EmptyTraining


@lru_cache(maxsize=None)
def harmonic(n: int) -> float:
    return float(sum(Fraction(1, i) for i in range(1, n + 1))) if n > 0 else 0.0


@lru_cache(maxsize=None)
def c_factor(n: int) -> float:
    """Average unsuccessful-search path length in a BST of n points."""
    if n <= 1:
        return 0.0
    return 2.0 * harmonic(n - 1) - 2.0 * (n - 1) / n


class _ITree:
    def __init__(self, X, rng, limit):
        self.feature, self.threshold, self.left, self.right, self.size = [], [], [], [], []
        self._grow(X, rng, 0, limit)
        self.feature = np.asarray(self.feature)
        self.threshold = np.asarray(self.threshold)
        self.left = np.asarray(self.left)
        self.right = np.asarray(self.right)
        self.size = np.asarray(self.size)
        self._leaf_c = None

    def _grow(self, X, rng, depth, limit) -> int:
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.size.append(X.shape[0])
        if depth >= limit or X.shape[0] <= 1:
            return node
        lo, hi = X.min(axis=0), X.max(axis=0)
        usable = np.flatnonzero(hi > lo)
        if usable.size == 0:
            return node
        f = int(usable[rng.integers(usable.size)])
        t = float(rng.uniform(lo[f], hi[f]))
        mask = X[:, f] < t
        self.feature[node] = f
        self.threshold[node] = t
        self.left[node] = self._grow(X[mask], rng, depth + 1, limit)
        self.right[node] = self._grow(X[~mask], rng, depth + 1, limit)
        return node

    def path_length(self, X) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=int)
        depth = np.zeros(X.shape[0])
        rows = np.arange(X.shape[0])
        while True:
            inner = self.feature[node] >= 0
            if not inner.any():
                break
            r, nd = rows[inner], node[inner]
            go_left = X[r, self.feature[nd]] < self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            depth[r] += 1
        if self._leaf_c is None:
            self._leaf_c = np.array([c_factor(int(s)) for s in self.size])
        return depth + self._leaf_c[node]


class IsolationForest:
    def __init__(self, n_trees: int = 100, subsample: int = 256, seed: int = 0):
        if n_trees < 1 or subsample < 2:
            raise ValueError("n_trees must be positive and subsample at least 2")
        self.n_trees = n_trees
        self.subsample = subsample
        self.seed = seed
        self.trees = []
        self.psi = 0

    def fit(self, X) -> "IsolationForest":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyTraining("isolation forest needs at least one training row")
        self.psi = min(self.subsample, X.shape[0])
        limit = math.ceil(math.log2(max(self.psi, 2)))
        self.trees = []
        for t in range(self.n_trees):
            rng = np.random.default_rng(np.random.SeedSequence([int(self.seed), t]))
            idx = rng.choice(X.shape[0], size=self.psi, replace=False)
            self.trees.append(_ITree(X[idx], rng, limit))
        return self

    def score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        mean_h = np.mean([t.path_length(X) for t in self.trees], axis=0)
        c = c_factor(self.psi)
        if c == 0:
            return np.ones(X.shape[0])
        return np.power(2.0, -mean_h / c)

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "subsample": self.subsample,
            "seed": self.seed,
            "psi": self.psi,
            "trees": [
                {k: getattr(t, k).tolist() for k in ("feature", "threshold", "left", "right", "size")}
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IsolationForest":
        m = cls(d["n_trees"], d["subsample"], d["seed"])
        m.psi = d["psi"]
        m.trees = []
        for td in d["trees"]:
            t = _ITree.__new__(_ITree)
            for k in ("feature", "threshold", "left", "right", "size"):
                setattr(t, k, np.asarray(td[k]))
            t._leaf_c = None
            m.trees.append(t)
        return m


def fit_iforest(X, n_trees: int = 100, subsample: int = 256, seed: int = 0) -> IsolationForest:
    return IsolationForest(n_trees, subsample, seed).fit(X)


def anomaly_score(model: IsolationForest, X) -> np.ndarray:
    return model.score(X)
