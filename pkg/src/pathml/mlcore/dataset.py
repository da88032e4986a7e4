from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import LengthMismatch, SchemaError


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = field(default=())

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X.reshape(-1, 1)
        self.y = np.asarray(self.y)
        if self.X.shape[0] != self.y.shape[0]:
            raise LengthMismatch(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]}")
        if not np.all(np.isfinite(self.X)):
            raise SchemaError("feature matrix contains non-finite values")
        if self.feature_names and len(self.feature_names) != self.X.shape[1]:
            raise SchemaError("feature_names length does not match the column count")

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.feature_names)
