"""Seeded synthetic scene families that stand in for detector output on real images.

An image is built from concept *pairs* drawn with probability proportional
to a symmetric co-occurrence bias matrix (diagonal entries are same-concept
pairs). Boxes cluster around a per-image anchor so overlapping boxes, and
hence edge weights above 1, are common.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .ingest import (BoundingBox, Detection, ImageDetections, ValidationError, Vocabulary,
                     write_detection_file)

EXTENT = (640.0, 480.0)


@dataclass(frozen=True)
class SceneFamilySpec:
    pool: tuple[str, ...]
    objects_range: tuple[int, int]
    bias: np.ndarray = field(compare=False)
    spread: float = 0.3
    size_range: tuple[float, float] = (0.05, 0.3)
    extent: tuple[float, float] = EXTENT
    seed: int = 0

    def __post_init__(self):
        if not self.pool:
            raise ValidationError("scene family needs a non-empty concept pool")
        if len(set(self.pool)) != len(self.pool):
            raise ValidationError("scene family pool has duplicate concepts")
        lo, hi = self.objects_range
        if not (1 <= lo <= hi):
            raise ValidationError(f"bad objects-per-image range {self.objects_range}")
        bias = np.asarray(self.bias, dtype=float)
        k = len(self.pool)
        if bias.shape != (k, k):
            raise ValidationError(f"bias matrix must be {k}x{k}, got {bias.shape}")
        if np.any(bias < 0) or not np.allclose(bias, bias.T):
            raise ValidationError("bias matrix must be symmetric and nonnegative")
        if not np.triu(bias).sum() > 0:
            raise ValidationError("bias matrix has no mass")
        if not (self.spread > 0 and self.extent[0] > 0 and self.extent[1] > 0):
            raise ValidationError("spread and extent must be positive")
        object.__setattr__(self, "bias", bias)

    def pair_probabilities(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Upper-triangle (incl. diagonal) index pairs and their sampling probabilities."""
        iu = np.triu_indices(len(self.pool))
        w = self.bias[iu]
        return iu[0], iu[1], w / w.sum()


def _box(rng, anchor, spec: SceneFamilySpec) -> BoundingBox:
    W, H = spec.extent
    cx = float(np.clip(anchor[0] + rng.normal(0.0, spec.spread * W), 0.0, W - 1))
    cy = float(np.clip(anchor[1] + rng.normal(0.0, spec.spread * H), 0.0, H - 1))
    lo, hi = spec.size_range
    bw = rng.uniform(lo, hi) * W
    bh = rng.uniform(lo, hi) * H
    x0 = round(max(0.0, cx - bw / 2), 2)
    y0 = round(max(0.0, cy - bh / 2), 2)
    x1 = round(min(W - 1, cx + bw / 2), 2)
    y1 = round(min(H - 1, cy + bh / 2), 2)
    return BoundingBox(x0, y0, max(x0, x1), max(y0, y1))


def generate_scenes(spec: SceneFamilySpec, count: int, prefix: str = "img") -> list[ImageDetections]:
    if count < 1:
        raise ValidationError("count must be >= 1")
    rng = np.random.default_rng(spec.seed)
    rows, cols, probs = spec.pair_probabilities()
    lo, hi = spec.objects_range
    W, H = spec.extent
    records = []
    for n in range(count):
        k = int(rng.integers(lo, hi + 1))
        picks = rng.choice(probs.size, size=math.ceil(k / 2), p=probs)
        concepts = [spec.pool[i] for p in picks for i in (rows[p], cols[p])][:k]
        anchor = (rng.uniform(0, W), rng.uniform(0, H))
        dets = []
        for concept in concepts:
            box = _box(rng, anchor, spec)
            score = round(float(rng.uniform(0.5, 1.0)), 4)
            dets.append(Detection(concept, box, score))
        records.append(ImageDetections(f"{prefix}_{n:06d}.jpg", tuple(dets)))
    return records


def write_scenes(spec: SceneFamilySpec, count: int, path: str | Path, prefix: str = "img") -> Path:
    path = Path(path)
    write_detection_file(path, generate_scenes(spec, count, prefix))
    return path


def _random_bias(rng, k: int, low: float = 0.2, high: float = 1.0) -> np.ndarray:
    m = rng.uniform(low, high, size=(k, k))
    return (m + m.T) / 2.0


def _check_vocab(vocab: Vocabulary):
    if len(vocab) < 20:
        raise ValidationError(f"vocabulary has {len(vocab)} concepts; need at least 20")


def far_pair(vocab: Vocabulary, seed: int = 0) -> tuple[SceneFamilySpec, SceneFamilySpec]:
    """Two families over disjoint concept pools with different scene layouts.

    The in-distribution family has busier scenes with loosely spread boxes;
    the outlier family has sparse scenes with a few dominant concepts.
    """
    _check_vocab(vocab)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(vocab))
    size = min(20, len(vocab) // 2)
    pool_a = tuple(vocab.concepts[i] for i in perm[:size])
    pool_b = tuple(vocab.concepts[i] for i in perm[size:2 * size])
    bias_a = _random_bias(rng, size)
    bias_b = _random_bias(rng, size, 0.01, 0.1)
    hubs = rng.choice(size, size=3, replace=False)
    bias_b[np.ix_(hubs, hubs)] += 1.0
    a = SceneFamilySpec(pool_a, (4, 9), bias_a, spread=0.3, seed=seed * 2 + 1)
    b = SceneFamilySpec(pool_b, (1, 4), bias_b, spread=0.1, seed=seed * 2 + 2)
    return a, b


def near_pair(vocab: Vocabulary, seed: int = 0) -> tuple[SceneFamilySpec, SceneFamilySpec]:
    """Two families over the same pool and layout that differ only in co-occurrence bias.

    The outlier family favours repeated detections of the same concept.
    """
    _check_vocab(vocab)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(vocab))
    size = min(20, len(vocab) // 2)
    pool = tuple(vocab.concepts[i] for i in perm[:size])
    bias_a = _random_bias(rng, size)
    bias_b = bias_a.copy()
    bias_b[np.diag_indices(size)] += 6.0
    a = SceneFamilySpec(pool, (3, 8), bias_a, seed=seed * 2 + 1)
    b = SceneFamilySpec(pool, (3, 8), bias_b, seed=seed * 2 + 2)
    return a, b


def with_seed(spec: SceneFamilySpec, seed: int) -> SceneFamilySpec:
    return replace(spec, seed=seed)
