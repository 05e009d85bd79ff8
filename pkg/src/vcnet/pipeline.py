"""End-to-end experiment runs: supervised, zero-shot, Mahalanobis and multiclass.

Every run is a pure function of its config: graphs are built in input
order, splits and models are seeded, and reports serialize with sorted
keys, so repeating a run reproduces its report byte for byte.
"""

from __future__ import annotations

import contextlib
import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detectors import GradientBoosting, OneClassSVM, RandomForest, make_detector
from .detectors.mahalanobis import mahalanobis_fit
from .embedders import EmbedderConfig, embed_corpus
from .graph import ConceptGraph, create_graph
from .ingest import (SynsetMap, ValidationError, Vocabulary, build_synset_map, builtin_vocabulary,
                     filter_detections, load_vocabulary, parse_detection_file,
                     restrict_to_vocabulary)
from .metrics import (EvalReport, accuracy, auroc, average_precision, f1, per_class_ovr,
                      weighted_mean)
from .persist import LabeledEmbeddings, load_embeddings

logger = logging.getLogger(__name__)

DETECTOR_MODES = ("pooled", "per_class")


class PipelineError(RuntimeError):
    """A stage failed for a reason other than bad input."""

    def __init__(self, stage: str, source: str, cause: BaseException):
        self.stage = stage
        self.source = source
        super().__init__(f"stage {stage!r} failed on {source}: {cause}")


class StageValidationError(ValidationError):
    def __init__(self, stage: str, source: str, cause: BaseException):
        self.stage = stage
        self.source = source
        super().__init__(f"stage {stage!r} rejected {source}: {cause}")


@contextlib.contextmanager
def stage(name: str, source: str):
    """Tag any exception raised inside with the stage name and its input."""
    try:
        yield
    except (StageValidationError, PipelineError):
        raise
    except ValidationError as exc:
        raise StageValidationError(name, source, exc) from exc
    except Exception as exc:
        raise PipelineError(name, source, exc) from exc


@dataclass
class ExperimentConfig:
    classes: tuple[str, ...] = ()
    json_paths: tuple[str, ...] = ()
    threshold: float = 0.5
    # a bundled vocabulary name or a path to a one-concept-per-line file
    vocabulary: str = "coco"
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    detector: str = "gbdt"
    mode: str = "pooled"
    split: float = 0.2
    seed: int = 0
    weighted: bool = True
    distance_anchor: str = "centroid"
    normalize_distance: bool = False
    nu: float = 0.1
    gamma: float | None = None
    f1_threshold: float = 0.5
    synset_xml: str | None = None
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        self.classes = tuple(self.classes)
        self.json_paths = tuple(str(p) for p in self.json_paths)
        if isinstance(self.embedder, str):
            self.embedder = EmbedderConfig(self.embedder, seed=self.seed)
        elif isinstance(self.embedder, dict):
            self.embedder = EmbedderConfig.from_dict(self.embedder)
        if len(self.classes) != len(self.json_paths):
            raise ValidationError(
                f"{len(self.classes)} class names but {len(self.json_paths)} detection files"
            )
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("class names must be unique")
        if not 0.0 < self.split < 1.0:
            raise ValidationError(f"split fraction must lie in (0, 1), got {self.split}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(f"confidence threshold must lie in [0, 1], got {self.threshold}")
        if self.mode not in DETECTOR_MODES:
            raise ValidationError(f"mode must be one of {DETECTOR_MODES}")
        if self.distance_anchor not in ("centroid", "corner"):
            raise ValidationError("distance_anchor must be 'centroid' or 'corner'")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    def require_classes(self, minimum: int):
        if len(self.classes) < minimum:
            raise ValidationError(f"this run needs at least {minimum} classes, got {len(self.classes)}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["classes"] = list(self.classes)
        d["json_paths"] = list(self.json_paths)
        d["embedder"] = self.embedder.to_dict()
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(read_config_file(path))


def read_config_file(path: str | Path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    return obj


def resolve_vocabulary(spec: str) -> Vocabulary:
    path = Path(spec)
    if path.is_file():
        return load_vocabulary(path)
    try:
        return builtin_vocabulary(spec)
    except ValidationError:
        raise ValidationError(f"vocabulary {spec!r} is neither a file nor a bundled name") from None


def report_json(report) -> str:
    """Canonical serialization; identical inputs give identical bytes."""
    if isinstance(report, EvalReport):
        report = report.to_dict()
    return json.dumps(report, sort_keys=True, indent=2)


# ---------------------------------------------------------------- corpus


@dataclass
class Corpus:
    graphs: list[ConceptGraph]
    labels: np.ndarray
    image_ids: list[str]
    class_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.graphs)

    def subset(self, idx) -> "Corpus":
        idx = np.asarray(idx, dtype=np.int64)
        return Corpus([self.graphs[i] for i in idx], self.labels[idx],
                      [self.image_ids[i] for i in idx], self.class_names)


def build_corpus(config: ExperimentConfig, vocab: Vocabulary | None = None) -> Corpus:
    """Ingest, filter, restrict and graph every class file, in class order."""
    vocab = resolve_vocabulary(config.vocabulary) if vocab is None else vocab
    graphs, labels, ids = [], [], []
    for label, (name, path) in enumerate(zip(config.classes, config.json_paths)):
        with stage("ingest", path):
            records = parse_detection_file(path)
        with stage("filter", path):
            records = [restrict_to_vocabulary(filter_detections(r, config.threshold), vocab)
                       for r in records]

        def build(rec):
            diag = None
            if config.normalize_distance:
                # diagonal of the tightest frame containing the image's boxes
                w = max((d.box.x_max + 1 for d in rec.detections), default=1.0)
                h = max((d.box.y_max + 1 for d in rec.detections), default=1.0)
                diag = float(np.hypot(w, h))
            return create_graph(vocab, rec, weighted=config.weighted,
                                distance_anchor=config.distance_anchor, diagonal=diag)

        with stage("graphs", path):
            if config.workers > 1:
                with ThreadPoolExecutor(config.workers) as pool:
                    built = list(pool.map(build, records))
            else:
                built = [build(r) for r in records]
        graphs.extend(built)
        labels.extend([label] * len(built))
        ids.extend(r.image_path for r in records)
        logger.info("class %s: %d images from %s", name, len(built), path)
    return Corpus(graphs, np.asarray(labels, dtype=np.int64), ids, config.classes)


def stratified_split(labels, fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Seeded per-class split; each class sends ``round(fraction * n)`` (>= 1) rows to test.

    Accepts a label array, a ``LabeledEmbeddings`` or a ``Corpus`` and
    returns sorted ``(train_idx, test_idx)`` index arrays.
    """
    if isinstance(labels, (LabeledEmbeddings, Corpus)):
        labels = labels.labels
    y = np.asarray(labels)
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"split fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        n = idx.size
        if n < 2:
            raise ValidationError(f"class {c} has {n} item; a split needs at least 2 per class")
        n_test = int(np.floor(fraction * n + 0.5))
        n_test = min(max(n_test, 1), n - 1)
        perm = rng.permutation(idx)
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    train_idx = np.sort(np.concatenate(train))
    test_idx = np.sort(np.concatenate(test))
    return train_idx, test_idx


def _assert_disjoint(train_idx, test_idx):
    overlap = np.intersect1d(train_idx, test_idx)
    if overlap.size:
        raise AssertionError(f"{overlap.size} rows appear in both train and test")


def _embed(train: Corpus, others: list[Corpus], cfg: EmbedderConfig):
    """Fit on ``train`` only; every other corpus goes through ``transform``."""
    with stage("embed", f"{len(train)} training graphs"):
        X_train, embedder = embed_corpus(train.graphs, cfg)
        rest = [embedder.transform(c.graphs) for c in others]
    for X in [X_train, *rest]:
        if not np.all(np.isfinite(X)):
            raise PipelineError("embed", cfg.method, ValueError("non-finite embedding"))
    return X_train, rest


def _binary_metrics(scores, labels, predicted) -> tuple[float | None, float | None, float]:
    y = np.asarray(labels)
    if np.unique(y).size < 2:
        return None, None, f1(predicted, y)
    return auroc(scores, y), average_precision(scores, y), f1(predicted, y)


# ---------------------------------------------------------------- runs


def run_supervised(config: ExperimentConfig) -> EvalReport:
    """First class is in-distribution (label 0); every other class is OOD (label 1)."""
    config.require_classes(2)
    corpus = build_corpus(config)
    binary = (corpus.labels > 0).astype(np.int64)
    with stage("split", "corpus"):
        train_idx, test_idx = stratified_split(corpus.labels, config.split, config.seed)
    _assert_disjoint(train_idx, test_idx)
    train, test = corpus.subset(train_idx), corpus.subset(test_idx)
    X_train, (X_test,) = _embed(train, [test], config.embedder)
    y_train, y_test = binary[train_idx], binary[test_idx]

    with stage("detector", config.detector):
        if config.detector not in ("logistic", "gbdt", "rf"):
            raise ValidationError(
                f"supervised runs need a probabilistic detector (logistic, gbdt, rf), "
                f"got {config.detector!r}")
        model = make_detector(config.detector, seed=config.seed)
        if config.detector == "rf":
            model.fit(X_train, y_train, classes=(0, 1))
        else:
            model.fit(X_train, y_train)
        p_train = model.predict_proba(X_train)[:, 1]
        p_test = model.predict_proba(X_test)[:, 1]

    thr = config.f1_threshold
    with stage("metrics", "report"):
        a_tr, ap_tr, f_tr = _binary_metrics(p_train, y_train, (p_train >= thr).astype(int))
        a_te, ap_te, f_te = _binary_metrics(p_test, y_test, (p_test >= thr).astype(int))
    return EvalReport(
        auroc_train=a_tr, auroc_test=a_te, aupr_train=ap_tr, aupr_test=ap_te,
        f1_train=f_tr, f1_test=f_te,
        counts={"train": int(train_idx.size), "test": int(test_idx.size),
                "train_ood": int(y_train.sum()), "test_ood": int(y_test.sum())},
        extra={"run": "supervised", "embedder": config.embedder.method,
               "detector": config.detector, "seed": config.seed},
    )


def run_zero_shot(config: ExperimentConfig) -> EvalReport:
    """Class 0 is the single in-distribution class; the rest are seen only at evaluation.

    The embedder and the one-class SVM see held-in ID rows only. Evaluation
    pools the held-out ID rows with every OOD row; OOD is the positive class
    and its score is the negated decision value.
    """
    config.require_classes(2)
    corpus = build_corpus(config)
    id_idx = np.flatnonzero(corpus.labels == 0)
    ood_idx = np.flatnonzero(corpus.labels > 0)
    if ood_idx.size == 0:
        raise StageValidationError("split", ",".join(config.json_paths[1:]),
                                   ValidationError("no OOD rows"))
    with stage("split", config.json_paths[0]):
        tr, te = stratified_split(corpus.labels[id_idx], config.split, config.seed)
    train_idx, test_id_idx = id_idx[tr], id_idx[te]
    _assert_disjoint(train_idx, np.r_[test_id_idx, ood_idx])
    train = corpus.subset(train_idx)
    evaluation = corpus.subset(np.r_[test_id_idx, ood_idx])
    X_train, (X_eval,) = _embed(train, [evaluation], config.embedder)

    with stage("detector", "ocsvm"):
        model = OneClassSVM(nu=config.nu, gamma=config.gamma).fit(X_train)
        train_scores = model.decision_function(X_train)
        eval_scores = model.decision_function(X_eval)
    y_eval = (evaluation.labels > 0).astype(np.int64)
    ood_score = -eval_scores
    with stage("metrics", "report"):
        a_te, ap_te, f_te = _binary_metrics(ood_score, y_eval, (eval_scores < 0).astype(int))
    inliers = int(np.sum(train_scores >= 0))
    return EvalReport(
        auroc_test=a_te, aupr_test=ap_te, f1_test=f_te,
        f1_train=f1((train_scores < 0).astype(int), np.zeros(train_scores.size, dtype=int)),
        counts={"train": int(train_idx.size), "test_id": int(test_id_idx.size),
                "test_ood": int(ood_idx.size)},
        extra={"run": "zero_shot", "embedder": config.embedder.method, "nu": config.nu,
               "gamma": model.gamma_, "train_nonnegative": inliers,
               "train_nonnegative_required": float((1.0 - config.nu) * train_idx.size),
               "seed": config.seed},
    )


def run_mahalanobis_eval(embeddings_path: str | Path, mode: str = "pooled",
                         ood_labels=(1,)) -> EvalReport:
    """Fit Gaussians to the in-distribution rows of a saved embedding file and score all rows.

    Rows whose label is in ``ood_labels`` are OOD (positive); their score is
    the negated Mahalanobis confidence.
    """
    if mode not in DETECTOR_MODES:
        raise ValidationError(f"mode must be one of {DETECTOR_MODES}")
    with stage("load", str(embeddings_path)):
        data = load_embeddings(embeddings_path)
    y = np.isin(data.labels, list(ood_labels)).astype(np.int64)
    if np.unique(data.labels).size < 2 or y.sum() == 0 or y.sum() == y.size:
        raise StageValidationError("load", str(embeddings_path),
                                   ValidationError("file holds a single class"))
    in_rows = y == 0
    with stage("fit", mode):
        if mode == "pooled":
            in_labels = tuple(int(c) for c in np.unique(data.labels[in_rows]))
            model = mahalanobis_fit(data.rows, data.labels, mode="pooled", in_labels=in_labels)
        else:
            model = mahalanobis_fit(data.rows[in_rows], data.labels[in_rows], mode="per_class")
        conf = model.score(data.rows)
    ood_score = -conf
    report = EvalReport(
        auroc_test=auroc(ood_score, y), aupr_test=average_precision(ood_score, y),
        counts={"rows": int(y.size), "in": int(in_rows.sum()), "ood": int(y.sum())},
        extra={"run": "mahalanobis", "mode": mode, "reg": model.reg, "dim": data.dim},
    )
    return report


class OneVsRestBoosting:
    """One binary boosting model per class; probabilities are renormalized per row."""

    kind = "gbdt_ovr"

    def __init__(self, seed: int = 0, **params):
        self.seed = seed
        self.params = params
        self.classes_: np.ndarray | None = None
        self.models: list[GradientBoosting] = []

    def fit(self, X, y) -> "OneVsRestBoosting":
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            raise ValidationError("one-vs-rest boosting needs at least two classes")
        self.models = [GradientBoosting(seed=self.seed, **self.params).fit(X, (y == c).astype(int))
                       for c in self.classes_]
        return self

    def predict_proba(self, X) -> np.ndarray:
        P = np.column_stack([m.predict_proba(X)[:, 1] for m in self.models])
        total = P.sum(axis=1, keepdims=True)
        return np.where(total > 0, P / np.where(total > 0, total, 1.0), 1.0 / P.shape[1])

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def _class_entries(P, y, classes, names) -> tuple[list[dict], dict]:
    rows = per_class_ovr(P, y, classes)
    entries = [dict(dataclasses.asdict(m), name=names[m.label]) for m in rows]
    head = {
        "auroc": weighted_mean(rows, "auroc"),
        "aupr": weighted_mean(rows, "aupr"),
        "f1": weighted_mean(rows, "f1"),
        "accuracy": accuracy(classes[np.argmax(P, axis=1)], y),
    }
    return entries, head


def map_labels(corpus: Corpus, synsets: SynsetMap) -> tuple[np.ndarray, tuple[str, ...]]:
    """Send every class name through the synset map; classes absent from it keep their name."""
    tops = [synsets[c] if c in synsets else c for c in corpus.class_names]
    missing = [c for c in corpus.class_names if c not in synsets]
    if missing:
        logger.warning("classes not in the synset map are used as-is: %s", missing)
    top_names = tuple(sorted(set(tops)))
    mapping = np.array([top_names.index(t) for t in tops], dtype=np.int64)
    return mapping[corpus.labels], top_names


def run_multiclass(config: ExperimentConfig, detector: str | None = None) -> EvalReport:
    """Multiclass detection over top-level synsets with a random forest or boosting."""
    detector = detector or (config.detector if config.detector in ("rf", "gbdt") else "rf")
    if detector not in ("rf", "gbdt"):
        raise ValidationError(f"multiclass runs use rf or gbdt, got {detector!r}")
    config.require_classes(2)
    corpus = build_corpus(config)
    if config.synset_xml:
        with stage("synset-map", config.synset_xml):
            synsets = build_synset_map(config.synset_xml)
    else:
        synsets = SynsetMap({})
    labels, top_names = map_labels(corpus, synsets)
    if len(top_names) < 2:
        raise ValidationError("fewer than two top-level classes after synset mapping")
    with stage("split", "corpus"):
        train_idx, test_idx = stratified_split(labels, config.split, config.seed)
    _assert_disjoint(train_idx, test_idx)
    train, test = corpus.subset(train_idx), corpus.subset(test_idx)
    X_train, (X_test,) = _embed(train, [test], config.embedder)
    y_train, y_test = labels[train_idx], labels[test_idx]
    classes = np.arange(len(top_names))

    with stage("detector", detector):
        if detector == "rf":
            model = RandomForest(seed=config.seed).fit(X_train, y_train, classes=classes)
        else:
            model = OneVsRestBoosting(seed=config.seed).fit(X_train, y_train)
            if model.classes_.size != classes.size:
                raise ValidationError("every top-level class needs training rows")
        P_train = model.predict_proba(X_train)
        P_test = model.predict_proba(X_test)

    with stage("metrics", "report"):
        per_train, head_train = _class_entries(P_train, y_train, classes, top_names)
        per_test, head_test = _class_entries(P_test, y_test, classes, top_names)
    return EvalReport(
        auroc_train=head_train["auroc"], auroc_test=head_test["auroc"],
        aupr_train=head_train["aupr"], aupr_test=head_test["aupr"],
        f1_train=head_train["f1"], f1_test=head_test["f1"],
        per_class=[{"label": int(c), "name": top_names[c], "train": per_train[c],
                    "test": per_test[c]} for c in classes],
        counts={"train": int(train_idx.size), "test": int(test_idx.size),
                "classes": len(top_names)},
        extra={"run": "multiclass", "detector": detector, "embedder": config.embedder.method,
               "accuracy_train": head_train["accuracy"], "accuracy_test": head_test["accuracy"],
               "seed": config.seed},
    )


def embed_labeled(config: ExperimentConfig) -> LabeledEmbeddings:
    """Embed every class file (fit on the whole corpus) with labels = class index."""
    config.require_classes(1)
    corpus = build_corpus(config)
    X, _ = _embed(corpus, [], config.embedder)
    return LabeledEmbeddings(X, corpus.labels)
