from __future__ import annotations

import logging

import numpy as np
from scipy.special import expit, log_expit

from .base import check_binary, check_features

logger = logging.getLogger(__name__)


class LogisticRegression:
    """L2-regularized logistic regression fit by full-batch gradient descent.

    Features are standardized with the training mean and standard deviation
    before fitting; the intercept is not penalized. Each iteration tries
    twice the previous step and backtracks (Armijo) from there.
    """

    kind = "logistic"

    def __init__(self, l2=1e-4, tol=1e-6, max_iter=10_000):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.mean_: np.ndarray | None = None
        self.scale_: np.ndarray | None = None
        self.coef_: np.ndarray | None = None
        self.intercept_ = 0.0
        self.n_iter_ = 0

    def _standardize(self, X):
        return (X - self.mean_) / self.scale_

    def _loss_grad(self, theta, Z, y):
        w, b = theta[:-1], theta[-1]
        z = Z @ w + b
        sign = 2.0 * y - 1.0
        loss = -log_expit(sign * z).mean() + 0.5 * self.l2 * (w @ w)
        resid = expit(z) - y
        grad = np.empty_like(theta)
        grad[:-1] = Z.T @ resid / y.size + self.l2 * w
        grad[-1] = resid.mean()
        return loss, grad

    def fit(self, X, y) -> "LogisticRegression":
        X = check_features(X)
        y = check_binary(y, X.shape[0])
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        Z = self._standardize(X)
        theta = np.zeros(X.shape[1] + 1)
        loss, grad = self._loss_grad(theta, Z, y)
        step = 1.0
        it = 0
        for it in range(1, self.max_iter + 1):
            if np.max(np.abs(grad)) <= self.tol:
                it -= 1
                break
            gg = grad @ grad
            step *= 2.0
            while True:
                cand = theta - step * grad
                c_loss, c_grad = self._loss_grad(cand, Z, y)
                if c_loss <= loss - 0.5 * step * gg or step < 1e-12:
                    break
                step *= 0.5
            theta, loss, grad = cand, c_loss, c_grad
        else:
            logger.debug("logistic regression stopped at max_iter=%d", self.max_iter)
        self.n_iter_ = it
        self.coef_ = theta[:-1]
        self.intercept_ = float(theta[-1])
        return self

    def decision_function(self, X) -> np.ndarray:
        return self._standardize(check_features(X)) @ self.coef_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def to_dict(self) -> dict:
        return {
            "l2": self.l2,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "LogisticRegression":
        model = cls(obj["l2"], obj["tol"], obj["max_iter"])
        model.mean_ = np.asarray(obj["mean"], dtype=float)
        model.scale_ = np.asarray(obj["scale"], dtype=float)
        model.coef_ = np.asarray(obj["coef"], dtype=float)
        model.intercept_ = float(obj["intercept"])
        return model
