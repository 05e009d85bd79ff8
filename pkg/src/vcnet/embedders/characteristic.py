"""Characteristic-function graph descriptors (FEATHER and heat-wavelet variants).

Both describe the distribution of two node features, ``log(degree + 1)`` and
the clustering coefficient, as seen from each node through a weighting
operator, then pool the node-level characteristic function values.

Output layout, outermost first:
    feather: feature (2) x walk length (order) x [real, imag] x theta
    wavelet: feature (2) x [real, imag] x theta x percentile pool
"""

from __future__ import annotations

import numpy as np

from ..graph import ConceptGraph
from ..linalg import active_laplacian, sym_eigh
from .config import EmbedderConfig


def node_features(a: np.ndarray) -> np.ndarray:
    """``(n, 2)`` array of log(degree + 1) and clustering coefficient from a 0/1 adjacency."""
    deg = a.sum(axis=1)
    closed = np.einsum("ij,jk,ki->i", a, a, a)
    denom = deg * (deg - 1)
    clustering = np.divide(closed, denom, out=np.zeros_like(closed), where=denom > 0)
    return np.column_stack([np.log1p(deg), clustering])


def theta_grid(cfg: EmbedderConfig) -> np.ndarray:
    return np.linspace(cfg.theta_max / cfg.eval_points, cfg.theta_max, cfg.eval_points)


def feather_embed(g: ConceptGraph, cfg: EmbedderConfig | None = None) -> np.ndarray:
    cfg = cfg or EmbedderConfig("feather")
    thetas = theta_grid(cfg)
    active = g.active_nodes()
    n = max(g.node_count, 1)
    if active.size == 0:
        return np.zeros(cfg.dimensions)
    a = g.adjacency(use_weights=False)[np.ix_(active, active)]
    feats = node_features(a)
    p = a / a.sum(axis=1, keepdims=True)
    powers, blocks = [], []
    pr = np.eye(active.size)
    for _ in range(cfg.feather_order):
        pr = pr @ p
        powers.append(pr)
    for f in range(feats.shape[1]):
        phase = np.outer(feats[:, f], thetas)
        cos, sin = np.cos(phase), np.sin(phase)
        for pr in powers:
            # isolated source nodes have zero rows: they add nothing to the sum
            blocks.append((pr @ cos).sum(axis=0) / n)
            blocks.append((pr @ sin).sum(axis=0) / n)
    return np.concatenate(blocks)


def heat_wavelets(lap: np.ndarray, tau: float) -> np.ndarray:
    """Row-stochastic heat wavelet operator ``V exp(-tau L) V^T``."""
    vals, vecs = sym_eigh(lap)
    psi = (vecs * np.exp(-tau * vals)) @ vecs.T
    psi = np.clip(psi, 0.0, None)
    return psi / psi.sum(axis=1, keepdims=True)


def wavelet_char_embed(g: ConceptGraph, cfg: EmbedderConfig | None = None) -> np.ndarray:
    cfg = cfg or EmbedderConfig("wavelet")
    thetas = theta_grid(cfg)
    levels = np.linspace(100.0 / cfg.wavelet_pools, 100.0, cfg.wavelet_pools)
    active = g.active_nodes()
    n_iso = g.node_count - active.size
    if g.node_count == 0:
        return np.zeros(cfg.dimensions)
    lap, _ = active_laplacian(g, cfg.use_weights)
    a = g.adjacency(use_weights=False)[np.ix_(active, active)]
    feats = node_features(a)
    psi = heat_wavelets(lap, cfg.tau) if active.size else np.zeros((0, 0))
    blocks = []
    for f in range(feats.shape[1]):
        phase = np.outer(feats[:, f], thetas)
        # an isolated node's wavelet is a point mass on itself, and its features are 0
        parts = (
            (psi @ np.cos(phase), np.ones((n_iso, thetas.size))),
            (psi @ np.sin(phase), np.zeros((n_iso, thetas.size))),
        )
        for act, iso in parts:
            values = np.vstack([act, iso])
            blocks.append(np.percentile(values, levels, axis=0).T.ravel())
    return np.concatenate(blocks)
