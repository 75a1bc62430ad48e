from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError


@dataclass(frozen=True)
class MetricsRow:
    """Precision, recall and F1 with Effective (label 1) as the positive class."""

    precision: float
    recall: float
    f1: float


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics(predicted, truth) -> MetricsRow:
    p = np.asarray(predicted, dtype=int)
    t = np.asarray(truth, dtype=int)
    if p.shape != t.shape:
        raise ArgumentError(f"length mismatch: {p.size} predictions vs {t.size} labels")
    tp = int(np.sum((p == 1) & (t == 1)))
    fp = int(np.sum((p == 1) & (t == 0)))
    fn = int(np.sum((p == 0) & (t == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return MetricsRow(precision, recall, f1_score(precision, recall))
