"""Labeled embedding matrices and their text file format.

One row per line: the integer label, then the vector components, all
comma-separated. Floats are written with ``repr`` so loading reproduces
every bit, including the sign of zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import ValidationError


@dataclass(frozen=True)
class LabeledEmbeddings:
    rows: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        labels = np.asarray(self.labels)
        if rows.ndim != 2:
            raise ValidationError(f"embedding rows must be 2-D, got shape {rows.shape}")
        if labels.shape != (rows.shape[0],):
            raise ValidationError(f"{rows.shape[0]} rows but {labels.size} labels")
        if labels.size and (labels.min() < 0 or not np.issubdtype(labels.dtype, np.integer)):
            raise ValidationError("labels must be nonnegative integers")
        if not np.all(np.isfinite(rows)):
            raise ValidationError("embeddings contain NaN or Inf")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels.astype(np.int64))

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def subset(self, idx) -> "LabeledEmbeddings":
        return LabeledEmbeddings(self.rows[idx], self.labels[idx])


def save_embeddings(path: str | Path, data: LabeledEmbeddings) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for label, row in zip(data.labels.tolist(), data.rows.tolist()):
            fh.write(",".join([str(label)] + [repr(v) for v in row]))
            fh.write("\n")


def load_embeddings(path: str | Path) -> LabeledEmbeddings:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read embeddings file {path}: {exc}") from None
    labels, rows = [], []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            label = int(parts[0])
            values = [float(v) for v in parts[1:]]
        except ValueError:
            raise ValidationError(f"{path}: line {lineno}: malformed embedding row") from None
        if label < 0:
            raise ValidationError(f"{path}: line {lineno}: negative label {label}")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ValidationError(
                f"{path}: line {lineno}: width {len(values)} differs from {width} on earlier lines"
            )
        labels.append(label)
        rows.append(values)
    if not rows:
        return LabeledEmbeddings(np.zeros((0, 0)), np.zeros(0, dtype=np.int64))
    return LabeledEmbeddings(np.array(rows, dtype=float), np.array(labels, dtype=np.int64))
