from __future__ import annotations

import numpy as np


def check_features(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain NaN or Inf")
    return X


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    if y.size and (not np.issubdtype(y.dtype, np.integer) and not np.all(y == np.round(y))):
        raise ValueError("labels must be integers")
    y = y.astype(np.int64)
    if np.any(y < 0):
        raise ValueError("labels must be nonnegative")
    return y


def check_binary(y, n: int) -> np.ndarray:
    y = check_labels(y, n)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("binary detector needs labels in {0, 1}")
    if y.min() == y.max():
        raise ValueError("training data contains a single class")
    return y.astype(float)
