"""Ridge linear regression solved through the normal equations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SingularSystem


@dataclass
class LinearModel:
    coef: np.ndarray
    intercept: float
    ridge_lambda: float

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        return X @ self.coef + self.intercept

    def objective_gradient(self, X, y) -> np.ndarray:
        """Gradient of sum((y - b0 - X b)^2) + lambda*|b|^2 w.r.t. (b0, b)."""
        X = np.asarray(X, dtype=float)
        r = np.asarray(y, dtype=float) - self.predict(X)
        g0 = -2.0 * r.sum()
        g = -2.0 * X.T @ r + 2.0 * self.ridge_lambda * self.coef
        return np.concatenate([[g0], g])

    def to_dict(self) -> dict:
        return {"coef": self.coef.tolist(), "intercept": self.intercept, "ridge_lambda": self.ridge_lambda}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.asarray(d["coef"], dtype=float), float(d["intercept"]), float(d["ridge_lambda"]))


def fit_linreg(X, y, ridge_lambda: float = 1e-8) -> LinearModel:
    """Minimise sum((y - b0 - X b)^2) + lambda*|b|^2; the intercept is not penalised."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=float)
    x_mean, y_mean = X.mean(axis=0), y.mean()
    Xc, yc = X - x_mean, y - y_mean
    A = Xc.T @ Xc + ridge_lambda * np.eye(X.shape[1])
    b = Xc.T @ yc
    try:
        coef = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        raise SingularSystem("normal equations are singular; use a positive ridge_lambda") from None
    if ridge_lambda == 0 and np.linalg.matrix_rank(A) < A.shape[0]:
        raise SingularSystem("normal equations are singular; use a positive ridge_lambda")
    return LinearModel(coef, float(y_mean - x_mean @ coef), float(ridge_lambda))


def predict_linreg(model: LinearModel, X) -> np.ndarray:
    return model.predict(X)
