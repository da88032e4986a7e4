"""Evaluation metrics. Binary metrics treat label 1 as positive."""
from __future__ import annotations

import numpy as np

from ..errors import LengthMismatch, SingleClassAuc


def _pair(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape[0] != b.shape[0]:
        raise LengthMismatch(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def mae(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    if y.size == 0:
        raise LengthMismatch("MAE of an empty sample")
    return float(np.mean(np.abs(y.astype(float) - y_hat.astype(float))))


def _counts(y, y_hat):
    y, y_hat = _pair(y, y_hat)
    tp = int(np.sum((y == 1) & (y_hat == 1)))
    fp = int(np.sum((y != 1) & (y_hat == 1)))
    fn = int(np.sum((y == 1) & (y_hat != 1)))
    return tp, fp, fn


def precision(y, y_hat) -> float:
    tp, fp, _ = _counts(y, y_hat)
    return tp / (tp + fp) if tp + fp else 0.0


def recall(y, y_hat) -> float:
    tp, _, fn = _counts(y, y_hat)
    return tp / (tp + fn) if tp + fn else 0.0


def f1(y, y_hat) -> float:
    tp, fp, fn = _counts(y, y_hat)
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def accuracy(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    if y.size == 0:
        raise LengthMismatch("accuracy of an empty sample")
    return float(np.mean(y == y_hat))


def confusion_matrix(y, y_hat, labels=None) -> tuple:
    """(labels, matrix) with rows = true label, columns = predicted label."""
    y, y_hat = _pair(y, y_hat)
    if labels is None:
        labels = sorted(set(y.tolist()) | set(y_hat.tolist()))
    pos = {lab: i for i, lab in enumerate(labels)}
    m = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y.tolist(), y_hat.tolist()):
        m[pos[t], pos[p]] += 1
    return list(labels), m


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x), dtype=float)
    i = 0
    n = len(x)
    while i < n:
        j = i
        while j + 1 < n and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc_roc(y, scores) -> float:
    """Rank-based AUC; a tied positive/negative pair counts one half."""
    y, scores = _pair(y, scores)
    pos = y == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassAuc("AUC needs both classes in the labels")
    ranks = _average_ranks(scores.astype(float))
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))
