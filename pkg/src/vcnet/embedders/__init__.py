"""Whole-graph embedders behind one fit/transform interface.

Structural methods (ldp, sf, netlsd, fgsd, feather, wavelet) are pure
functions of a graph, so ``fit`` is a no-op. graph2vec and gl2vec train a
corpus model in ``fit`` and infer new document vectors in ``transform``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..graph import ConceptGraph
from ..ingest import ValidationError
from .characteristic import feather_embed, wavelet_char_embed
from .config import METHODS, STRUCTURAL, EmbedderConfig
from .ldp import ldp_embed
from .spectral import fgsd_embed, heat_trace, laplacian_spectrum, netlsd_embed, sf_embed
from .wl import Graph2Vec, WlFeatureBag, wl_features

logger = logging.getLogger(__name__)

__all__ = [
    "EmbedderConfig", "EmbeddingVector", "Graph2Vec", "METHODS", "STRUCTURAL",
    "StructuralEmbedder", "WlFeatureBag", "embed_corpus", "feather_embed", "fgsd_embed",
    "heat_trace", "laplacian_spectrum", "ldp_embed", "make_embedder", "netlsd_embed",
    "sf_embed", "wavelet_char_embed", "wl_features",
]

_STRUCTURAL_FUNCS: dict[str, Callable[[ConceptGraph, EmbedderConfig], np.ndarray]] = {
    "ldp": ldp_embed,
    "sf": sf_embed,
    "netlsd": netlsd_embed,
    "fgsd": fgsd_embed,
    "feather": feather_embed,
    "wavelet": wavelet_char_embed,
}


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    method: str


class StructuralEmbedder:
    def __init__(self, cfg: EmbedderConfig):
        if cfg.method not in _STRUCTURAL_FUNCS:
            raise ValidationError(f"{cfg.method} is not a structural embedder")
        self.cfg = cfg
        self._func = _STRUCTURAL_FUNCS[cfg.method]

    def fit(self, graphs: list[ConceptGraph]) -> "StructuralEmbedder":
        if not graphs:
            raise ValidationError("cannot fit an embedder on an empty corpus")
        return self

    def embed(self, g: ConceptGraph) -> np.ndarray:
        vec = self._func(g, self.cfg)
        if vec.shape != (self.cfg.dimensions,):
            raise AssertionError(f"{self.cfg.method} produced shape {vec.shape}")
        return vec

    def transform(self, graphs: list[ConceptGraph]) -> np.ndarray:
        if not graphs:
            return np.zeros((0, self.cfg.dimensions))
        if self.cfg.workers > 1:
            with ThreadPoolExecutor(self.cfg.workers) as pool:
                rows = list(pool.map(self.embed, graphs))
        else:
            rows = [self.embed(g) for g in graphs]
        return np.vstack(rows)


def make_embedder(cfg: EmbedderConfig):
    if cfg.method == "graph2vec":
        return Graph2Vec(cfg)
    if cfg.method == "gl2vec":
        return Graph2Vec(cfg, line_graphs=True)
    return StructuralEmbedder(cfg)


def embed_corpus(corpus: list[ConceptGraph], cfg: EmbedderConfig):
    """Fit on ``corpus`` and return ``(matrix, fitted_embedder)``.

    For graph2vec/gl2vec the matrix holds the fit-time document vectors.
    """
    if not corpus:
        raise ValidationError("cannot embed an empty corpus")
    embedder = make_embedder(cfg).fit(corpus)
    if isinstance(embedder, Graph2Vec):
        matrix = embedder.train_vectors_.copy()
    else:
        matrix = embedder.transform(corpus)
    return matrix, embedder
