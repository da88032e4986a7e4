"""CART decision trees (gini for classes, squared error for values).

Split ties go to the lowest feature index, then the lowest threshold, so a
tree is a pure function of its data and RNG.
"""
from __future__ import annotations

import numpy as np


def _split_threshold(lo: float, hi: float) -> float:
    t = lo + (hi - lo) / 2.0
    return lo if t >= hi else t


def _best_split(X, target, idx, feats, min_leaf, classify):
    """Best (feature, threshold) over ``feats`` for rows ``idx``, or None."""
    n = idx.size
    yt = target[idx]
    if classify:
        total = yt.sum(axis=0)
        parent = float((total ** 2).sum() / n)
    else:
        total = float(yt.sum())
        parent = total * total / n
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    if not size_ok.any():
        return None
    best = None
    best_gain = 1e-10 * max(1.0, abs(parent))
    for f in feats:
        x = X[idx, f]
        order = np.argsort(x, kind="mergesort")
        xs = x[order]
        if xs[0] == xs[-1]:
            continue
        valid = size_ok & (xs[:-1] < xs[1:])
        if not valid.any():
            continue
        if classify:
            left = np.cumsum(yt[order], axis=0)[:-1]
            score = (left ** 2).sum(axis=1) / nl + ((total - left) ** 2).sum(axis=1) / nr
        else:
            left = np.cumsum(yt[order])[:-1]
            score = left * left / nl + (total - left) ** 2 / nr
        score = np.where(valid, score, -np.inf)
        i = int(np.argmax(score))
        gain = score[i] - parent
        if gain > best_gain:
            best_gain = gain
            best = (int(f), _split_threshold(float(xs[i]), float(xs[i + 1])))
    return best


class DecisionTree:
    """Array-encoded binary tree; ``value`` holds class probabilities or a mean."""

    def __init__(self, max_depth: int = 8, min_leaf: int = 5, criterion: str = "gini", max_features=None):
        if criterion not in ("gini", "mse"):
            raise ValueError(f"unknown criterion {criterion!r}")
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.criterion = criterion
        self.max_features = max_features
        self.n_classes = 0
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    @property
    def classify(self) -> bool:
        return self.criterion == "gini"

    def fit(self, X, y, rng: np.random.Generator | None = None, n_classes: int | None = None) -> "DecisionTree":
        """``y`` is class ids 0..K-1 for gini, numbers for mse."""
        X = np.asarray(X, dtype=float)
        if self.classify:
            y = np.asarray(y, dtype=int)
            self.n_classes = int(n_classes if n_classes is not None else y.max() + 1)
            target = np.eye(self.n_classes)[y]
        else:
            target = np.asarray(y, dtype=float)
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []
        self._grow(X, target, np.arange(X.shape[0]), 0, rng)
        self._freeze()
        return self

    def _leaf_value(self, target, idx):
        if self.classify:
            counts = target[idx].sum(axis=0)
            return counts / counts.sum()
        return float(target[idx].mean())

    def _grow(self, X, target, idx, depth, rng) -> int:
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(self._leaf_value(target, idx))
        if depth >= self.max_depth or idx.size < 2 * self.min_leaf:
            return node
        if self.classify:
            if np.count_nonzero(target[idx].sum(axis=0)) <= 1:
                return node
        elif np.ptp(target[idx]) == 0:
            return node
        n_feat = X.shape[1]
        if self.max_features is not None and self.max_features < n_feat:
            feats = np.sort(rng.choice(n_feat, size=self.max_features, replace=False))
        else:
            feats = np.arange(n_feat)
        split = _best_split(X, target, idx, feats, self.min_leaf, self.classify)
        if split is None:
            return node
        f, t = split
        go_left = X[idx, f] <= t
        self.feature[node] = f
        self.threshold[node] = t
        self.left[node] = self._grow(X, target, idx[go_left], depth + 1, rng)
        self.right[node] = self._grow(X, target, idx[~go_left], depth + 1, rng)
        return node

    def _freeze(self) -> None:
        self.feature = np.asarray(self.feature, dtype=int)
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.left = np.asarray(self.left, dtype=int)
        self.right = np.asarray(self.right, dtype=int)
        self.value = np.asarray(self.value, dtype=float)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        while True:
            inner = self.feature[node] >= 0
            if not inner.any():
                return node
            r, nd = rows[inner], node[inner]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict(self, X) -> np.ndarray:
        v = self.predict_value(X)
        return np.argmax(v, axis=1) if self.classify else v

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "criterion": self.criterion,
            "max_features": self.max_features,
            "n_classes": self.n_classes,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        t = cls(d["max_depth"], d["min_leaf"], d["criterion"], d["max_features"])
        t.n_classes = d["n_classes"]
        t.feature, t.threshold = d["feature"], d["threshold"]
        t.left, t.right, t.value = d["left"], d["right"], d["value"]
        t._freeze()
        return t
