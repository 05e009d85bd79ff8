"""One-class SVM with an RBF kernel, solved in the dual by SMO.

Dual problem::

    minimize   1/2 a^T K a
    subject to 0 <= a_i <= 1 / (nu * n),  sum_i a_i = 1

The decision function is ``sum_i a_i k(x_i, x) - rho``; positive means
inlier. Working pairs are chosen with second-order information (the
maximal-violating index plus the partner giving the largest objective
decrease), as in LIBSVM.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .base import check_features

logger = logging.getLogger(__name__)

_TAU = 1e-12
_CHUNK = 256


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """``exp(-gamma * ||a - b||^2)``; each entry depends only on its own pair of rows."""
    out = np.empty((A.shape[0], B.shape[0]))
    for start in range(0, A.shape[0], _CHUNK):
        diff = A[start:start + _CHUNK, None, :] - B[None, :, :]
        out[start:start + _CHUNK] = np.exp(-gamma * np.einsum("ijk,ijk->ij", diff, diff))
    return out


def default_gamma(X: np.ndarray) -> float:
    """``1 / (d * mean per-feature variance)``; 1.0 when every feature is constant."""
    var = float(X.var(axis=0).mean())
    if not var > 0:
        return 1.0
    return 1.0 / (X.shape[1] * var)


@dataclass
class OneClassSVM:
    nu: float = 0.1
    gamma: float | None = None
    tol: float = 1e-4
    max_iter: int = 1_000_000

    kind = "ocsvm"

    def __post_init__(self):
        self.support_vectors_: np.ndarray | None = None
        self.dual_coef_: np.ndarray | None = None
        self.rho_ = 0.0
        self.gamma_: float | None = None
        self.alpha_: np.ndarray | None = None
        self.gradient_: np.ndarray | None = None
        self.n_iter_ = 0

    @property
    def upper_bound_(self) -> float:
        return 1.0 / (self.nu * self.alpha_.size)

    def fit(self, X) -> "OneClassSVM":
        X = check_features(X)
        n = X.shape[0]
        if n == 0:
            raise ValueError("one-class SVM needs at least one row")
        if not 0.0 < self.nu <= 1.0:
            raise ValueError("nu must lie in (0, 1]")
        gamma = default_gamma(X) if self.gamma is None else float(self.gamma)
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        self.gamma_ = gamma
        K = rbf_kernel(X, X, gamma)
        C = 1.0 / (self.nu * n)
        # uniform start is feasible for any nu <= 1 and independent of row order
        alpha = np.full(n, 1.0 / n)
        grad = K @ alpha
        diag = np.diag(K)
        it = 0
        while it < self.max_iter:
            up = alpha < C
            low = alpha > 0
            neg_g = -grad
            i = int(np.argmax(np.where(up, neg_g, -np.inf)))
            g_max = neg_g[i]
            g_min = np.min(np.where(low, neg_g, np.inf))
            if g_max - g_min < self.tol:
                break
            b = g_max - neg_g
            cand = low & (b > 0)
            a = diag[i] + diag - 2.0 * K[i]
            a = np.where(a > _TAU, a, _TAU)
            j = int(np.argmax(np.where(cand, b * b / a, -np.inf)))
            # move mass from j to i
            delta = (grad[j] - grad[i]) / a[j]
            delta = min(delta, C - alpha[i], alpha[j])
            alpha[i] += delta
            alpha[j] -= delta
            # snap to the box so rounding cannot leave a bound variable "free"
            if C - alpha[i] <= 1e-14 * C:
                alpha[i] = C
            if alpha[j] <= 1e-14 * C:
                alpha[j] = 0.0
            grad += delta * (K[:, i] - K[:, j])
            it += 1
        else:
            logger.warning("one-class SVM hit max_iter=%d before reaching tol", self.max_iter)
        self.n_iter_ = it
        alpha = np.clip(alpha, 0.0, C)
        self.alpha_ = alpha
        self.gradient_ = grad
        sv = alpha > 0
        self.support_vectors_ = X[sv]
        self.dual_coef_ = alpha[sv]
        # rho sits at the bottom of the KKT interval: every training row with
        # alpha < C then scores >= 0 exactly under the same scoring path.
        raw = self._raw(X)
        self.rho_ = float(np.min(raw[alpha < C])) if np.any(alpha < C) else float(np.max(raw))
        return self

    def _raw(self, X: np.ndarray) -> np.ndarray:
        K = rbf_kernel(X, self.support_vectors_, self.gamma_)
        return (K * self.dual_coef_).sum(axis=1)

    def decision_function(self, X) -> np.ndarray:
        return self._raw(check_features(X)) - self.rho_

    def kkt_violation(self) -> float:
        """``max_{a_i < C} -G_i - min_{a_i > 0} -G_i``; <= tol at convergence."""
        C = self.upper_bound_
        neg_g = -self.gradient_
        up = self.alpha_ < C
        low = self.alpha_ > 0
        return float(np.max(neg_g[up], initial=-np.inf) - np.min(neg_g[low], initial=np.inf))

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "gamma": self.gamma_,
            "tol": self.tol,
            "rho": self.rho_,
            "support_vectors": self.support_vectors_.tolist(),
            "dual_coef": self.dual_coef_.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "OneClassSVM":
        model = cls(nu=obj["nu"], gamma=obj["gamma"], tol=obj["tol"])
        model.gamma_ = float(obj["gamma"])
        model.rho_ = float(obj["rho"])
        model.support_vectors_ = np.asarray(obj["support_vectors"], dtype=float)
        model.dual_coef_ = np.asarray(obj["dual_coef"], dtype=float)
        return model
