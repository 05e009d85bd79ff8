"""Threshold-free and thresholded evaluation metrics.

Ties are handled by midranks (AUROC) and by grouping equal scores into a
single threshold (average precision), so results never depend on input
order.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

logger = logging.getLogger(__name__)


def _binary(labels) -> np.ndarray:
    y = np.asarray(labels).astype(np.int64).ravel()
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be binary (0/1)")
    return y


def auroc(scores, labels) -> float:
    """Probability a random positive outscores a random negative (ties count 1/2)."""
    s = np.asarray(scores, dtype=float).ravel()
    y = _binary(labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both positive and negative labels")
    ranks = rankdata(s, method="average")
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """``sum_k (R_k - R_{k-1}) P_k`` over distinct score thresholds, descending."""
    s = np.asarray(scores, dtype=float).ravel()
    y = _binary(labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive label")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[last]
    predicted = last + 1
    precision = tp / predicted
    recall_step = np.diff(np.r_[0, tp]) / n_pos
    return float(np.sum(recall_step * precision))


def f1(predicted, labels) -> float:
    p = _binary(predicted)
    y = _binary(labels)
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def accuracy(predicted, labels) -> float:
    return float(np.mean(np.asarray(predicted) == np.asarray(labels)))


@dataclass
class ClassMetrics:
    label: int
    support: int
    auroc: float | None
    aupr: float | None
    f1: float


def per_class_ovr(probabilities, labels, classes) -> list[ClassMetrics]:
    """One-vs-rest AUROC, AP and F1 (from argmax predictions) for every class column."""
    P = np.asarray(probabilities, dtype=float)
    y = np.asarray(labels).astype(np.int64)
    classes = np.asarray(classes)
    pred = classes[np.argmax(P, axis=1)]
    out = []
    for col, c in enumerate(classes):
        target = (y == c).astype(np.int64)
        support = int(target.sum())
        if support == 0 or support == y.size:
            logger.warning("class %s has no %s rows; excluded from OVR averages",
                           c, "positive" if support == 0 else "negative")
            out.append(ClassMetrics(int(c), support, None, None, f1(pred == c, target)))
            continue
        out.append(ClassMetrics(
            int(c), support,
            auroc(P[:, col], target),
            average_precision(P[:, col], target),
            f1((pred == c).astype(np.int64), target),
        ))
    return out


def weighted_mean(per_class: list[ClassMetrics], attr: str) -> float:
    rows = [(getattr(m, attr), m.support) for m in per_class if getattr(m, attr) is not None]
    total = sum(w for _, w in rows)
    if total == 0:
        raise ValueError(f"no class contributes to the weighted {attr}")
    return float(sum(v * w for v, w in rows) / total)


def multiclass_auroc_ovr(probabilities, labels, classes=None) -> float:
    """Support-weighted mean of one-vs-rest AUROCs; absent classes are skipped."""
    P = np.asarray(probabilities, dtype=float)
    if classes is None:
        classes = np.arange(P.shape[1])
    y = np.asarray(labels).astype(np.int64)
    if np.unique(y).size < 2:
        raise ValueError("multiclass AUROC needs at least two classes present")
    return weighted_mean(per_class_ovr(P, y, classes), "auroc")


@dataclass
class EvalReport:
    """Metrics for one run; ``None`` marks a metric the run cannot define."""

    auroc_train: float | None = None
    auroc_test: float | None = None
    aupr_train: float | None = None
    aupr_test: float | None = None
    f1_train: float | None = None
    f1_test: float | None = None
    per_class: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def percent(self) -> dict:
        """Same report with every headline metric scaled to 0-100."""
        d = self.to_dict()
        for key in ("auroc_train", "auroc_test", "aupr_train", "aupr_test", "f1_train", "f1_test"):
            if d[key] is not None:
                d[key] = 100.0 * d[key]
        return d
