"""Spectral whole-graph descriptors on the normalized Laplacian: SF, NetLSD, FGSD.

All three only diagonalize the block of non-isolated nodes; isolated nodes
are accounted for analytically (eigenvalue 0, zero pseudoinverse rows).
"""

from __future__ import annotations

import numpy as np

from ..graph import ConceptGraph
from ..linalg import active_laplacian, histogram, sym_eigh, sym_eigvalsh
from .config import EmbedderConfig

PINV_CUTOFF = 1e-9


def laplacian_spectrum(g: ConceptGraph, use_weights: bool = True) -> np.ndarray:
    """Ascending eigenvalues of the normalized Laplacian, clipped to ``[0, 2]``."""
    lap, n_iso = active_laplacian(g, use_weights)
    vals = np.clip(sym_eigvalsh(lap), 0.0, 2.0)
    return np.sort(np.concatenate([np.zeros(n_iso), vals]))


def sf_embed(g: ConceptGraph, cfg: EmbedderConfig | None = None) -> np.ndarray:
    cfg = cfg or EmbedderConfig("sf")
    k = cfg.dimensions
    vals = laplacian_spectrum(g, cfg.use_weights)[:k]
    out = np.zeros(k)
    out[: vals.size] = vals
    return out


def netlsd_times(cfg: EmbedderConfig) -> np.ndarray:
    lo, hi = cfg.time_range
    return np.logspace(np.log10(lo), np.log10(hi), cfg.time_steps)


def heat_trace(eigenvalues: np.ndarray, times) -> np.ndarray:
    """``h(t) = sum_i exp(-t * lambda_i)`` for each ``t``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return np.exp(-np.outer(times, eigenvalues)).sum(axis=1)


def netlsd_embed(g: ConceptGraph, cfg: EmbedderConfig | None = None) -> np.ndarray:
    cfg = cfg or EmbedderConfig("netlsd")
    lap, n_iso = active_laplacian(g, cfg.use_weights)
    vals = np.clip(sym_eigvalsh(lap), 0.0, 2.0)
    return n_iso + heat_trace(vals, netlsd_times(cfg))


def laplacian_pinv(lap: np.ndarray) -> np.ndarray:
    vals, vecs = sym_eigh(lap)
    inv = np.zeros_like(vals)
    keep = vals > PINV_CUTOFF
    inv[keep] = 1.0 / vals[keep]
    return (vecs * inv) @ vecs.T


def fgsd_embed(g: ConceptGraph, cfg: EmbedderConfig | None = None) -> np.ndarray:
    """Histogram of harmonic spectral distances ``L+_ii + L+_jj - 2 L+_ij`` over node pairs."""
    cfg = cfg or EmbedderConfig("fgsd")
    lap, n_iso = active_laplacian(g, cfg.use_weights)
    pinv = laplacian_pinv(lap)
    diag = np.diag(pinv)
    iu = np.triu_indices(diag.size, k=1)
    s_active = diag[iu[0]] + diag[iu[1]] - 2.0 * pinv[iu]
    # pairs (isolated, active j) have distance L+_jj; (isolated, isolated) have 0
    values = np.concatenate([s_active, diag, [0.0]])
    weights = np.concatenate(
        [np.ones(s_active.size), np.full(diag.size, float(n_iso)), [n_iso * (n_iso - 1) / 2.0]]
    )
    return histogram(values, cfg.bins, cfg.fgsd_range, weights=weights)
