"""Weisfeiler-Lehman subtree features and Graph2Vec / GL2Vec document embeddings.

Each graph is treated as a document whose words are its WL subtree labels.
Document vectors are trained with the distributed bag-of-words objective
(PV-DBOW) under negative sampling, the same model word2vec-style tools use
for paragraph vectors.
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..graph import ConceptGraph, line_graph
from ..ingest import ValidationError
from .config import EmbedderConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WlFeatureBag:
    """WL labels for rounds ``0..iterations``; ``rounds[r][i]`` is node ``i``'s label."""

    rounds: tuple[tuple[str, ...], ...]

    @property
    def tokens(self) -> list[str]:
        return [label for labels in self.rounds for label in labels]

    def counts(self) -> Counter:
        return Counter(self.tokens)


def _relabel(label: str, neighbor_labels: list[str]) -> str:
    payload = label + "|" + ",".join(sorted(neighbor_labels))
    return hashlib.md5(payload.encode("utf-8")).hexdigest()


def wl_features(g: ConceptGraph, iterations: int = 2, initial: str = "degree") -> WlFeatureBag:
    """WL relabeling starting from node degrees (or node ids with ``initial="concept"``).

    Nodes without neighbours keep their label across rounds.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    nbrs = g.neighbors()
    if initial == "degree":
        labels = [str(len(n)) for n in nbrs]
    elif initial == "concept":
        labels = [str(i) for i in range(g.node_count)]
    else:
        raise ValueError(f"unknown initial labeling {initial!r}")
    rounds = [tuple(labels)]
    for _ in range(iterations):
        labels = [
            _relabel(labels[i], [labels[j] for j in nbrs[i]]) if nbrs[i] else labels[i]
            for i in range(g.node_count)
        ]
        rounds.append(tuple(labels))
    return WlFeatureBag(tuple(rounds))


def _initial_vector(doc: list[str], seed: int, dim: int) -> np.ndarray:
    """Small uniform start vector seeded by the document's content.

    Identical documents start from the same point, so their trained vectors
    differ only through sampling noise.
    """
    digest = hashlib.md5("\x1f".join(doc).encode("utf-8")).digest()
    rng = np.random.default_rng([seed, int.from_bytes(digest[:8], "little")])
    return (rng.random(dim) - 0.5) / dim


_LCG_MULT = np.uint64(25214903917)
_LCG_INC = np.uint64(11)
_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True)
def _train_dbow(doc_vecs, out_vecs, tokens, offsets, cum_weights, epochs,
                alpha0, alpha_min, negative, seed, train_out):
    n_docs = offsets.size - 1
    n_vocab = out_vecs.shape[0]
    dim = doc_vecs.shape[1]
    total = epochs * tokens.size
    total_weight = cum_weights[-1]
    state = np.uint64(seed) * np.uint64(6364136223846793005) + np.uint64(1442695040888963407)
    neu1e = np.zeros(dim)
    done = 0
    for _ in range(epochs):
        for d in range(n_docs):
            for p in range(offsets[d], offsets[d + 1]):
                alpha = alpha0 - (alpha0 - alpha_min) * done / total
                done += 1
                word = tokens[p]
                neu1e[:] = 0.0
                for s in range(negative + 1):
                    if s == 0:
                        target = word
                        label = 1.0
                    else:
                        state = state * _LCG_MULT + _LCG_INC
                        u = (state >> np.uint64(11)) * _UNIT
                        target = np.searchsorted(cum_weights, u * total_weight, side="right")
                        if target >= n_vocab:
                            target = n_vocab - 1
                        if target == word:
                            continue
                        label = 0.0
                    f = 0.0
                    for k in range(dim):
                        f += doc_vecs[d, k] * out_vecs[target, k]
                    if f > 30.0:
                        sig = 1.0
                    elif f < -30.0:
                        sig = 0.0
                    else:
                        sig = 1.0 / (1.0 + np.exp(-f))
                    g = (label - sig) * alpha
                    for k in range(dim):
                        neu1e[k] += g * out_vecs[target, k]
                        if train_out:
                            out_vecs[target, k] += g * doc_vecs[d, k]
                for k in range(dim):
                    doc_vecs[d, k] += neu1e[k]


class Graph2Vec:
    """Graph2Vec (``line_graphs=False``) or GL2Vec (``line_graphs=True``)."""

    def __init__(self, cfg: EmbedderConfig | None = None, line_graphs: bool = False):
        self.cfg = cfg or EmbedderConfig("gl2vec" if line_graphs else "graph2vec")
        self.line_graphs = line_graphs
        self.vocab_: dict[str, int] | None = None
        self.token_vectors_: np.ndarray | None = None
        self.train_vectors_: np.ndarray | None = None

    def _document(self, g: ConceptGraph) -> list[str]:
        if self.line_graphs:
            g = line_graph(g)
            initial = "degree"
        else:
            initial = self.cfg.wl_initial
        return wl_features(g, self.cfg.wl_iterations, initial).tokens

    def _run(self, doc_vecs, docs_ids, seed, train_out):
        tokens = np.concatenate([np.asarray(ids, dtype=np.int64) for ids in docs_ids]) \
            if docs_ids else np.zeros(0, dtype=np.int64)
        offsets = np.zeros(len(docs_ids) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(ids) for ids in docs_ids])
        if tokens.size == 0:
            return
        _train_dbow(doc_vecs, self.token_vectors_, tokens, offsets, self._cum_weights,
                    self.cfg.epochs, self.cfg.learning_rate, self.cfg.min_learning_rate,
                    self.cfg.negative, seed, train_out)

    def fit(self, graphs: list[ConceptGraph]) -> "Graph2Vec":
        if not graphs:
            raise ValidationError("cannot fit an embedder on an empty corpus")
        docs = [self._document(g) for g in graphs]
        counts = Counter(t for doc in docs for t in doc)
        kept = sorted(t for t, c in counts.items() if c >= self.cfg.min_count)
        self.vocab_ = {t: i for i, t in enumerate(kept)}
        freq = np.array([counts[t] for t in kept], dtype=float)
        self._cum_weights = np.cumsum(freq ** 0.75) if kept else np.ones(1)
        dim = self.cfg.dimensions
        doc_vecs = np.vstack([_initial_vector(doc, self.cfg.seed, dim) for doc in docs])
        self.token_vectors_ = np.zeros((max(len(kept), 1), dim))
        doc_ids = []
        for i, doc in enumerate(docs):
            ids = [self.vocab_[t] for t in doc if t in self.vocab_]
            if not ids:
                logger.warning("graph %d has no WL features; its embedding is the zero vector", i)
                doc_vecs[i] = 0.0
            doc_ids.append(ids)
        self._run(doc_vecs, doc_ids, self.cfg.seed, True)
        self.train_vectors_ = doc_vecs
        return self

    def infer(self, g: ConceptGraph) -> np.ndarray:
        """Train a fresh (zero-initialized) document vector against frozen token vectors."""
        if self.vocab_ is None:
            raise RuntimeError("embedder is not fitted")
        vec = np.zeros((1, self.cfg.dimensions))
        ids = [self.vocab_[t] for t in self._document(g) if t in self.vocab_]
        if not ids:
            logger.warning("graph has no known WL features; returning the zero vector")
            return vec[0]
        self._run(vec, [ids], self.cfg.seed + 1, False)
        return vec[0]

    def transform(self, graphs: list[ConceptGraph]) -> np.ndarray:
        if not graphs:
            return np.zeros((0, self.cfg.dimensions))
        return np.vstack([self.infer(g) for g in graphs])
