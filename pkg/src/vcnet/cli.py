"""Command-line interface.

Exit codes: 0 on success, 1 on invalid input (bad flags, files or configs),
2 on any other failure. Reports go to stdout as JSON unless ``--out`` is
given.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .detectors import dump_model, load_model, make_detector
from .embedders import METHODS, EmbedderConfig, embed_corpus
from .explain import explain_ood
from .ingest import ValidationError, build_synset_map
from .metrics import EvalReport, auroc, average_precision, f1
from .persist import LabeledEmbeddings, load_embeddings, save_embeddings
from .pipeline import (DETECTOR_MODES, ExperimentConfig, build_corpus, embed_labeled,
                       read_config_file, report_json, resolve_vocabulary, run_mahalanobis_eval,
                       run_multiclass, run_supervised, run_zero_shot)
from .synth import far_pair, near_pair, write_scenes

logger = logging.getLogger("vcnet")

EXIT_OK, EXIT_INVALID, EXIT_FAILURE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _csv(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _shared_flags() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--config", help="JSON config file; explicit flags override its values")
    p.add_argument("--classes", type=_csv, help="comma-separated class names (first is in-distribution)")
    p.add_argument("--json-paths", type=_csv, help="comma-separated detection files, one per class")
    p.add_argument("--threshold", type=float, help="detection confidence threshold (default 0.5)")
    p.add_argument("--vocabulary", help="bundled vocabulary name or vocabulary file (default coco)")
    p.add_argument("--embedder", choices=METHODS, help="graph embedder (default fgsd)")
    p.add_argument("--detector", help="detector kind (default gbdt)")
    p.add_argument("--mode", choices=DETECTOR_MODES, help="Mahalanobis fit mode")
    p.add_argument("--split", type=float, help="held-out fraction per class (default 0.2)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--workers", type=int, help="worker threads for per-graph work")
    p.add_argument("--out", help="output path; reports go to stdout when omitted")
    p.add_argument("--percent", action="store_true", help="show metrics on a 0-100 scale")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_FLAG_KEYS = ("classes", "json_paths", "threshold", "vocabulary", "detector", "mode", "split",
              "seed", "workers", "out")


def config_from_args(args) -> ExperimentConfig:
    base = read_config_file(args.config) if args.config else {}
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            base[key] = value
    emb = base.get("embedder", {})
    if isinstance(emb, str):
        emb = {"method": emb}
    emb = dict(emb)
    if args.embedder is not None:
        if emb.get("method") not in (None, args.embedder):
            # settings tuned for another method would not apply
            emb = {}
        emb["method"] = args.embedder
    if args.seed is not None or "seed" not in emb:
        emb["seed"] = base.get("seed", 0)
    if args.workers is not None:
        emb["workers"] = args.workers
    base["embedder"] = EmbedderConfig.from_dict(emb)
    return ExperimentConfig.from_dict(base)


def _emit(obj, args, percent_ok: bool = True):
    if isinstance(obj, EvalReport):
        obj = obj.percent() if (args.percent and percent_ok) else obj.to_dict()
    elif isinstance(obj, dict) and args.percent:
        obj = {k: (v.percent() if isinstance(v, EvalReport) else v) for k, v in obj.items()}
    if isinstance(obj, dict):
        obj = {k: (v.to_dict() if isinstance(v, EvalReport) else v) for k, v in obj.items()}
    text = report_json(obj)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise ValidationError(f"--{name.replace('_', '-')} is required for {args.command}")


# ---------------------------------------------------------------- commands


def cmd_build_graphs(args):
    config = config_from_args(args)
    corpus = build_corpus(config)
    lines = [
        json.dumps({"image_path": iid, "class": config.classes[int(lab)], "label": int(lab),
                    "graph": g.to_dict()}, sort_keys=True)
        for g, lab, iid in zip(corpus.graphs, corpus.labels, corpus.image_ids)
    ]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_embed(args):
    _require(args, "out")
    config = config_from_args(args)
    save_embeddings(config.out, embed_labeled(config))


def _training_rows(data: LabeledEmbeddings, kind: str):
    if kind == "ocsvm":
        return data.rows[data.labels == 0], None
    if kind == "rf":
        return data.rows, data.labels
    return data.rows, (data.labels > 0).astype(np.int64)


def cmd_train(args):
    _require(args, "embeddings", "out")
    config = config_from_args(args)
    data = load_embeddings(args.embeddings)
    kind = config.detector
    X, y = _training_rows(data, kind)
    params = {"nu": config.nu, "gamma": config.gamma} if kind == "ocsvm" else {}
    model = make_detector(kind, seed=config.seed, **params)
    model.fit(X) if y is None else model.fit(X, y)
    dump_model(model, config.out)


def _score_model(model, X) -> tuple[np.ndarray, np.ndarray]:
    """OOD scores (higher = more OOD) and hard OOD predictions."""
    if model.kind == "ocsvm":
        s = model.decision_function(X)
        return -s, (s < 0).astype(np.int64)
    if model.kind == "mahalanobis":
        s = model.score(X)
        return -s, np.zeros(X.shape[0], dtype=np.int64)
    P = model.predict_proba(X)
    # every label other than the first class counts as OOD
    p = 1.0 - P[:, 0]
    return p, (p >= 0.5).astype(np.int64)


def cmd_evaluate(args):
    if args.model or args.embeddings:
        _require(args, "model", "embeddings")
        model = load_model(args.model)
        data = load_embeddings(args.embeddings)
        y = (data.labels > 0).astype(np.int64)
        if y.min() == y.max():
            raise ValidationError("evaluation embeddings hold a single class")
        scores, pred = _score_model(model, data.rows)
        report = EvalReport(auroc_test=auroc(scores, y), aupr_test=average_precision(scores, y),
                            f1_test=f1(pred, y), counts={"rows": int(y.size), "ood": int(y.sum())},
                            extra={"run": "evaluate", "detector": model.kind})
    else:
        report = run_supervised(config_from_args(args))
    _emit(report, args)


def cmd_zero_shot(args):
    _emit(run_zero_shot(config_from_args(args)), args)


def cmd_maha_eval(args):
    _require(args, "embeddings")
    ood = tuple(int(v) for v in _csv(args.ood_labels))
    _emit(run_mahalanobis_eval(args.embeddings, args.mode or "pooled", ood_labels=ood), args)


def cmd_multiclass(args):
    config = config_from_args(args)
    if args.synset_xml:
        config.synset_xml = args.synset_xml
    kinds = [args.detector] if args.detector else ["rf", "gbdt"]
    _emit({k: run_multiclass(config, detector=k) for k in kinds}, args)


def cmd_synth(args):
    _require(args, "out")
    vocab = resolve_vocabulary(args.vocabulary or "coco")
    family = {"far": far_pair, "near": near_pair}[args.family]
    a, b = family(vocab, seed=args.seed or 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "in": str(write_scenes(a, args.count, out / "in.jsonl", prefix="in")),
        "ood": str(write_scenes(b, args.count, out / "ood.jsonl", prefix="ood")),
    }
    print(report_json(paths))


def cmd_explain(args):
    config = config_from_args(args)
    config.require_classes(2)
    vocab = resolve_vocabulary(config.vocabulary)
    corpus = build_corpus(config, vocab)
    id_idx = np.flatnonzero(corpus.labels == 0)
    other = np.flatnonzero(corpus.labels > 0)
    if args.target:
        matches = [i for i in other if corpus.image_ids[i] == args.target]
        if not matches:
            raise ValidationError(f"target image {args.target!r} not found in the OOD files")
        t = matches[0]
    elif other.size:
        t = int(other[0])
    else:
        raise ValidationError("no OOD rows to explain")
    id_corpus = corpus.subset(id_idx)
    E, embedder = embed_corpus(id_corpus.graphs, config.embedder)
    x = embedder.transform([corpus.graphs[t]])[0]
    report = explain_ood(corpus.graphs[t], x, id_corpus.graphs, E, vocab,
                         target_id=corpus.image_ids[t], id_ids=id_corpus.image_ids)
    _emit(report.to_dict(), args, percent_ok=False)


def cmd_synset_map(args):
    _require(args, "xml")
    smap = build_synset_map(args.xml)
    _emit(dict(sorted(smap.entries.items())), args, percent_ok=False)


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_flags()
    parser = _Parser(prog="vcnet", description="Visual concept network OOD toolkit")
    parser.add_argument("--version", action="version", version=f"vcnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[shared], help=help_text)
        p.set_defaults(func=func)
        return p

    add("build-graphs", cmd_build_graphs, "write one concept graph per image as JSON lines")
    add("embed", cmd_embed, "embed every class file and save labeled embeddings")
    p = add("train", cmd_train, "fit a detector on saved embeddings and write a model file")
    p.add_argument("--embeddings")
    p = add("evaluate", cmd_evaluate,
            "run the supervised pipeline, or score saved embeddings with --model")
    p.add_argument("--model")
    p.add_argument("--embeddings")
    add("zero-shot", cmd_zero_shot, "one-class SVM trained on the first class only")
    p = add("maha-eval", cmd_maha_eval, "Mahalanobis scoring of saved embeddings")
    p.add_argument("--embeddings")
    p.add_argument("--ood-labels", default="1", help="comma-separated OOD labels (default 1)")
    p = add("multiclass", cmd_multiclass, "multiclass detection over top-level synsets")
    p.add_argument("--synset-xml")
    p = add("synth", cmd_synth, "write a seeded synthetic scene-family pair into --out")
    p.add_argument("--family", choices=("far", "near"), default="far")
    p.add_argument("--count", type=int, default=1000)
    p = add("explain", cmd_explain, "diff an OOD graph against its nearest in-distribution graph")
    p.add_argument("--target", help="image id from the OOD files (default: the first one)")
    p = add("synset-map", cmd_synset_map, "print the synset to top-level ancestor map")
    p.add_argument("--xml")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:
        # --help / --version
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
