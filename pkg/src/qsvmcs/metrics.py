"""Accuracy, ROC curves and trapezoidal AUC.

Tied scores move through the threshold sweep together, so the trapezoidal
area equals the Mann-Whitney statistic with ties counted as one half.
"""

from __future__ import annotations

import csv
from typing import Sequence

import numpy as np


def _binary(labels) -> np.ndarray:
    """Map {-1, +1} or {0, 1} labels to booleans (True = signal)."""
    y = np.asarray(labels).reshape(-1)
    return y > 0


def accuracy(predicted, truth) -> float:
    p = _binary(predicted)
    t = _binary(truth)
    if p.size == 0:
        raise ValueError("no predictions")
    if p.size != t.size:
        raise ValueError(f"{p.size} predictions for {t.size} labels")
    return float(np.mean(p == t))


def roc_curve(scores, labels) -> np.ndarray:
    """(fpr, tpr) points, shape (m, 2), from (0, 0) to (1, 1).

    Thresholds sweep the distinct scores from high to low; a point is emitted
    after each tie group.
    """
    s = np.asarray(scores, dtype=float).reshape(-1)
    pos = _binary(labels)
    if s.size != pos.size:
        raise ValueError(f"{s.size} scores for {pos.size} labels")
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    tp = np.cumsum(pos[order])
    fp = np.cumsum(~pos[order])
    # last index of every tie group
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    fpr = np.r_[0.0, fp[ends] / n_neg]
    tpr = np.r_[0.0, tp[ends] / n_pos]
    return np.column_stack([fpr, tpr])


def auc(points) -> float:
    """Trapezoidal area under an ROC curve."""
    pts = np.asarray(points, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) * 0.5))


def roc_auc(scores, labels) -> float:
    return auc(roc_curve(scores, labels))


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Mean and standard deviation / sqrt(count) (sample std; 0 for one value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no values")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def write_roc_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fpr", "tpr"])
        for fpr, tpr in np.asarray(points):
            w.writerow([repr(float(fpr)), repr(float(tpr))])


def read_roc_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["fpr", "tpr"]:
        raise ValueError(f"{path}: missing fpr,tpr header")
    return np.array([[float(a), float(b)] for a, b in rows[1:]])
