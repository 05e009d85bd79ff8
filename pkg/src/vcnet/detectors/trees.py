"""Exact-greedy decision trees, logistic gradient boosting and random forests.

Split ties are broken by lowest feature index, then lowest threshold, so
fits are deterministic given the seed.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import check_binary, check_features, check_labels

_MIN_GAIN = 1e-12


class Tree:
    """Flat array representation; ``feature[i] == -1`` marks a leaf."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list = []

    def add_node(self, value) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, left: int, right: int):
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    @property
    def depth(self) -> int:
        def rec(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(rec(self.left[i]), rec(self.right[i]))
        return rec(0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left, right = np.asarray(self.left), np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = feature[node] >= 0
        while active.any():
            r, n = rows[active], node[active]
            go_left = X[r, feature[n]] <= threshold[n]
            node[r] = np.where(go_left, left[n], right[n])
            active = feature[node] >= 0
        return node

    def to_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            v = self.value[node]
            return {"value": v.tolist() if isinstance(v, np.ndarray) else v}
        return {
            "feature": self.feature[node],
            "threshold": self.threshold[node],
            "left": self.to_dict(self.left[node]),
            "right": self.to_dict(self.right[node]),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Tree":
        tree = cls()

        def rec(o):
            if "value" in o:
                v = o["value"]
                return tree.add_node(np.asarray(v, dtype=float) if isinstance(v, list) else v)
            node = tree.add_node(0)
            left = rec(o["left"])
            right = rec(o["right"])
            tree.split(node, int(o["feature"]), float(o["threshold"]), left, right)
            return node

        rec(obj)
        return tree


def _candidate_splits(xs: np.ndarray, min_leaf: int) -> np.ndarray:
    """Mask over sorted positions ``k`` (left = first ``k + 1`` rows) that split cleanly."""
    m = xs.shape[0]
    ok = xs[1:] > xs[:-1]
    n_left = np.arange(1, m)[:, None]
    ok &= (n_left >= min_leaf) & (m - n_left >= min_leaf)
    return ok


def _pick(gain: np.ndarray, xs: np.ndarray, features: np.ndarray):
    """Best (feature, threshold, gain); ``features`` must be ascending."""
    flat = gain.T.ravel()
    best = int(np.argmax(flat))
    if not np.isfinite(flat[best]):
        return None
    f_pos, k = divmod(best, gain.shape[0])
    lo, hi = xs[k, f_pos], xs[k + 1, f_pos]
    thr = (lo + hi) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(features[f_pos]), float(thr), float(flat[best])


def best_regression_split(X, target, idx, features, min_leaf):
    """Squared-error reduction split for the rows ``idx``."""
    xn = X[np.ix_(idx, features)]
    order = np.argsort(xn, axis=0, kind="stable")
    xs = np.take_along_axis(xn, order, axis=0)
    ys = target[idx][order]
    m = idx.size
    cs = np.cumsum(ys, axis=0)[:-1]
    total = target[idx].sum()
    n_left = np.arange(1, m, dtype=float)[:, None]
    gain = cs ** 2 / n_left + (total - cs) ** 2 / (m - n_left) - total ** 2 / m
    gain = np.where(_candidate_splits(xs, min_leaf), gain, -np.inf)
    return _pick(gain, xs, features)


def best_gini_split(X, onehot, idx, features, min_leaf):
    """Weighted Gini impurity reduction split for the rows ``idx``."""
    xn = X[np.ix_(idx, features)]
    order = np.argsort(xn, axis=0, kind="stable")
    xs = np.take_along_axis(xn, order, axis=0)
    oh = onehot[idx]
    m = idx.size
    left = np.cumsum(oh[order], axis=0)[:-1]  # (m-1, f, C)
    total = oh.sum(axis=0)
    n_left = np.arange(1, m, dtype=float)[:, None]
    right = total - left
    gain = (left ** 2).sum(axis=2) / n_left + (right ** 2).sum(axis=2) / (m - n_left)
    gain -= (total ** 2).sum() / m
    gain = np.where(_candidate_splits(xs, min_leaf), gain, -np.inf)
    return _pick(gain, xs, features)


def _partition(X, idx, feature, threshold):
    mask = X[idx, feature] <= threshold
    return idx[mask], idx[~mask]


class GradientBoosting:
    """Binary gradient boosting with logistic loss and Newton leaf values."""

    kind = "gbdt"

    def __init__(self, n_rounds=100, max_depth=3, learning_rate=0.1, min_samples_leaf=2, seed=0):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.base_score = 0.0
        self.trees: list[Tree] = []

    def _grow(self, X, resid, hess):
        tree = Tree()
        all_features = np.arange(X.shape[1])
        stack = [(tree.add_node(0.0), np.arange(X.shape[0]), 0)]
        while stack:
            node, idx, depth = stack.pop()
            den = hess[idx].sum()
            tree.value[node] = float(resid[idx].sum() / den) if den > 1e-150 else 0.0
            if depth >= self.max_depth or idx.size < 2 * self.min_samples_leaf:
                continue
            split = best_regression_split(X, resid, idx, all_features,
                                          self.min_samples_leaf)
            if split is None or split[2] <= _MIN_GAIN:
                continue
            feature, thr, _ = split
            li, ri = _partition(X, idx, feature, thr)
            left, right = tree.add_node(0.0), tree.add_node(0.0)
            tree.split(node, feature, thr, left, right)
            stack.append((right, ri, depth + 1))
            stack.append((left, li, depth + 1))
        return tree

    def fit(self, X, y) -> "GradientBoosting":
        X = check_features(X)
        y = check_binary(y, X.shape[0])
        rate = y.mean()
        self.base_score = float(np.log(rate / (1.0 - rate)))
        raw = np.full(X.shape[0], self.base_score)
        self.trees = []
        for _ in range(self.n_rounds):
            p = expit(raw)
            tree = self._grow(X, y - p, p * (1.0 - p))
            leaves = tree.apply(X)
            raw = raw + self.learning_rate * np.asarray(tree.value, dtype=float)[leaves]
            self.trees.append(tree)
        return self

    def decision_function(self, X) -> np.ndarray:
        X = check_features(X)
        raw = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            raw += self.learning_rate * np.asarray(tree.value, dtype=float)[tree.apply(X)]
        return raw

    def predict_proba(self, X) -> np.ndarray:
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def to_dict(self) -> dict:
        return {
            "n_rounds": self.n_rounds,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "min_samples_leaf": self.min_samples_leaf,
            "seed": self.seed,
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GradientBoosting":
        model = cls(obj["n_rounds"], obj["max_depth"], obj["learning_rate"],
                    obj["min_samples_leaf"], obj["seed"])
        model.base_score = float(obj["base_score"])
        model.trees = [Tree.from_dict(t) for t in obj["trees"]]
        return model


class RandomForest:
    """Bagged unpruned Gini trees with sqrt(d) features per split; majority-vote probabilities."""

    kind = "rf"

    def __init__(self, n_trees=100, max_depth=None, min_samples_leaf=1, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.classes_: np.ndarray | None = None
        self.trees: list[Tree] = []

    def _grow(self, X, onehot, idx_root, rng):
        d = X.shape[1]
        n_sub = max(1, int(np.sqrt(d)))
        tree = Tree()
        stack = [(tree.add_node(0), idx_root, 0)]
        while stack:
            node, idx, depth = stack.pop()
            counts = onehot[idx].sum(axis=0)
            tree.value[node] = int(np.argmax(counts))
            if np.count_nonzero(counts) <= 1 or idx.size < 2 * self.min_samples_leaf:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            perm = rng.permutation(d)
            split = best_gini_split(X, onehot, idx, np.sort(perm[:n_sub]), self.min_samples_leaf)
            # keep drawing features when the sampled ones cannot separate these rows
            start = n_sub
            while split is None and start < d:
                split = best_gini_split(X, onehot, idx, np.sort(perm[start:start + n_sub]),
                                        self.min_samples_leaf)
                start += n_sub
            if split is None:
                continue
            feature, thr, _ = split
            li, ri = _partition(X, idx, feature, thr)
            left, right = tree.add_node(0), tree.add_node(0)
            tree.split(node, feature, thr, left, right)
            stack.append((right, ri, depth + 1))
            stack.append((left, li, depth + 1))
        return tree

    def fit(self, X, y, classes=None) -> "RandomForest":
        X = check_features(X)
        y = check_labels(y, X.shape[0])
        self.classes_ = np.unique(y) if classes is None else np.asarray(sorted(classes))
        if classes is None and self.classes_.size < 2:
            raise ValueError("random forest needs at least two classes (or explicit classes)")
        if not np.isin(y, self.classes_).all():
            raise ValueError("labels outside the declared classes")
        onehot = (y[:, None] == self.classes_[None, :]).astype(float)
        n = X.shape[0]
        streams = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        self.trees = []
        for ss in streams:
            rng = np.random.default_rng(ss)
            boot = np.sort(rng.integers(0, n, n))
            self.trees.append(self._grow(X, onehot, boot, rng))
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = check_features(X)
        votes = np.zeros((X.shape[0], self.classes_.size))
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            cls = np.asarray(tree.value, dtype=np.int64)[tree.apply(X)]
            votes[rows, cls] += 1.0
        return votes / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "seed": self.seed,
            "classes": self.classes_.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RandomForest":
        model = cls(obj["n_trees"], obj["max_depth"], obj["min_samples_leaf"], obj["seed"])
        model.classes_ = np.asarray(obj["classes"])
        model.trees = [Tree.from_dict(t) for t in obj["trees"]]
        return model
