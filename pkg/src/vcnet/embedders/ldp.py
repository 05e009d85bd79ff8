"""Local degree profile histograms."""

from __future__ import annotations

import numpy as np

from ..graph import ConceptGraph
from ..linalg import histogram
from .config import EmbedderConfig


def degree_profile(g: ConceptGraph) -> np.ndarray:
    """Per-node (degree, min, max, mean, std) of neighbour degrees; zeros when isolated."""
    deg = g.degrees().astype(float)
    prof = np.zeros((g.node_count, 5))
    for node, nbrs in enumerate(g.neighbors()):
        if not nbrs:
            continue
        nd = deg[nbrs]
        prof[node] = (deg[node], nd.min(), nd.max(), nd.mean(), nd.std())
    return prof


def ldp_embed(g: ConceptGraph, cfg: EmbedderConfig | None = None) -> np.ndarray:
    cfg = cfg or EmbedderConfig("ldp")
    prof = degree_profile(g)
    blocks = []
    for col in prof.T:
        if col.size == 0:
            blocks.append(np.zeros(cfg.bins))
            continue
        lo, hi = float(col.min()), float(col.max())
        if hi > lo:
            blocks.append(histogram(col, cfg.bins, (lo, hi), normalize=True))
        else:
            block = np.zeros(cfg.bins)
            block[0] = 1.0
            blocks.append(block)
    return np.concatenate(blocks)
