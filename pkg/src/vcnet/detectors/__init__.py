"""OOD detectors over embedding vectors, plus versioned JSON model artifacts."""

from __future__ import annotations

import json
from pathlib import Path

from ..ingest import ValidationError
from .logistic import LogisticRegression
from .mahalanobis import MahalanobisModel, mahalanobis_fit, mahalanobis_score
from .ocsvm import OneClassSVM, default_gamma, rbf_kernel
from .trees import GradientBoosting, RandomForest, Tree

__all__ = [
    "DETECTORS", "GradientBoosting", "LogisticRegression", "MahalanobisModel", "OneClassSVM",
    "RandomForest", "Tree", "default_gamma", "dump_model", "load_model", "mahalanobis_fit",
    "mahalanobis_score", "make_detector", "model_from_dict", "model_to_dict", "rbf_kernel",
]

MODEL_FORMAT = "vcnet-model"
MODEL_VERSION = 1

DETECTORS = {
    "logistic": LogisticRegression,
    "gbdt": GradientBoosting,
    "rf": RandomForest,
    "ocsvm": OneClassSVM,
    "mahalanobis": MahalanobisModel,
}


def make_detector(kind: str, seed: int = 0, **params):
    if kind in ("gbdt", "rf"):
        return DETECTORS[kind](seed=seed, **params)
    if kind in ("logistic", "ocsvm"):
        return DETECTORS[kind](**params)
    raise ValidationError(f"unknown trainable detector {kind!r}; expected logistic, gbdt, rf or ocsvm")


def model_to_dict(model) -> dict:
    return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": model.kind,
            "params": model.to_dict()}


def model_from_dict(obj: dict):
    if obj.get("format") != MODEL_FORMAT:
        raise ValidationError("not a vcnet model document")
    if obj.get("version") != MODEL_VERSION:
        raise ValidationError(f"unsupported model version {obj.get('version')}")
    kind = obj.get("kind")
    if kind not in DETECTORS:
        raise ValidationError(f"unknown model kind {kind!r}")
    return DETECTORS[kind].from_dict(obj["params"])


def dump_model(model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path: str | Path):
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read model file {path}: {exc}") from None
    return model_from_dict(obj)
