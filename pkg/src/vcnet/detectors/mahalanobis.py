"""Gaussian fits to embeddings and the Mahalanobis confidence score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import solve_spd
from .base import check_features, check_labels

# used when the covariance trace is zero (all rows identical)
_REG_FLOOR = 1e-6


@dataclass
class MahalanobisModel:
    """Class means with one shared covariance; ``reg`` is added to its diagonal."""

    means: np.ndarray
    cov: np.ndarray
    reg: float
    classes: np.ndarray | None = None
    mode: str = "per_class"

    kind = "mahalanobis"

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def regularized_cov(self) -> np.ndarray:
        return self.cov + self.reg * np.eye(self.dim)

    def half_distances(self, X) -> np.ndarray:
        """``(n, classes)`` array of ``1/2 (x - mu_c)^T (S + reg I)^-1 (x - mu_c)``."""
        X = check_features(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"embedding width {X.shape[1]} != model width {self.dim}")
        cov = self.regularized_cov()
        out = np.empty((X.shape[0], self.means.shape[0]))
        for c, mu in enumerate(self.means):
            diff = X - mu
            solved = solve_spd(cov, diff.T).T
            out[:, c] = 0.5 * np.sum(diff * solved, axis=1)
        return out

    def score(self, X) -> np.ndarray:
        """Higher means more in-distribution; 0 at a class mean."""
        return -np.min(self.half_distances(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "means": self.means.tolist(),
            "cov": self.cov.tolist(),
            "reg": self.reg,
            "classes": None if self.classes is None else self.classes.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MahalanobisModel":
        return cls(
            means=np.asarray(obj["means"], dtype=float),
            cov=np.asarray(obj["cov"], dtype=float),
            reg=float(obj["reg"]),
            classes=None if obj["classes"] is None else np.asarray(obj["classes"]),
            mode=obj["mode"],
        )


def regularization(cov: np.ndarray) -> float:
    d = cov.shape[0]
    lam = 1e-6 * float(np.trace(cov)) / d
    return lam if lam > 0 else _REG_FLOOR


def mahalanobis_fit(X, y=None, mode: str = "per_class", in_labels=(0,)) -> MahalanobisModel:
    """Fit class-conditional Gaussians with a shared covariance, or one pooled Gaussian.

    ``per_class``: a mean per label and ``S = 1/N sum_c sum_{y_i=c} (x_i - mu_c)(x_i - mu_c)^T``.
    ``pooled``: mean and sample covariance (``ddof=1``) of the rows whose label is
    in ``in_labels``; all other rows are ignored.
    """
    X = check_features(X)
    y = np.zeros(X.shape[0], dtype=np.int64) if y is None else check_labels(y, X.shape[0])
    if mode == "per_class":
        classes = np.unique(y)
        means, centred = [], []
        for c in classes:
            rows = X[y == c]
            if rows.shape[0] < 2:
                raise ValueError(f"class {c} has {rows.shape[0]} row(s); need at least 2")
            mu = rows.mean(axis=0)
            means.append(mu)
            centred.append(rows - mu)
        D = np.vstack(centred)
        cov = D.T @ D / X.shape[0]
        means = np.vstack(means)
    elif mode == "pooled":
        rows = X[np.isin(y, list(in_labels))]
        if rows.shape[0] < 2:
            raise ValueError(f"pooled fit needs at least 2 in-distribution rows, got {rows.shape[0]}")
        classes = np.asarray(sorted(in_labels))
        means = rows.mean(axis=0)[None, :]
        D = rows - means[0]
        cov = D.T @ D / (rows.shape[0] - 1)
    else:
        raise ValueError(f"unknown Mahalanobis mode {mode!r}")
    cov = (cov + cov.T) / 2.0
    return MahalanobisModel(means, cov, regularization(cov), classes, mode)


def mahalanobis_score(model: MahalanobisModel, X) -> np.ndarray:
    return model.score(X)
