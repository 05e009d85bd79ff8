"""Dense numerical primitives shared by the embedders and detectors."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .graph import ConceptGraph

SYMMETRY_RTOL = 1e-12
# Values this close (in bin widths) below an edge count as on the edge, so
# rational spectral distances such as 1.0 bin identically on every code path.
BIN_EDGE_TOL = 1e-9


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class SingularMatrixError(ArithmeticError):
    def __init__(self, index: int, pivot: float):
        self.index = index
        self.pivot = pivot
        super().__init__(
            f"matrix is not positive definite: Cholesky pivot {index} is {pivot:.3e}"
        )


def check_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    return a


def sym_eigh(a: np.ndarray) -> EigenDecomposition:
    """Full ascending spectrum of a real symmetric matrix (LAPACK ``syevd``)."""
    a = check_symmetric(a)
    if a.shape[0] == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    vals, vecs = np.linalg.eigh(a)
    return EigenDecomposition(vals, vecs)


def sym_eigvalsh(a: np.ndarray) -> np.ndarray:
    a = check_symmetric(a)
    if a.shape[0] == 0:
        return np.zeros(0)
    return np.linalg.eigvalsh(a)


def _first_bad_pivot(a: np.ndarray) -> tuple[int, float]:
    n = a.shape[0]
    l = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - l[j, :j] @ l[j, :j]
        if not pivot > 0:
            return j, float(pivot)
        l[j, j] = np.sqrt(pivot)
        l[j + 1:, j] = (a[j + 1:, j] - l[j + 1:, :j] @ l[j, :j]) / l[j, j]
    # LAPACK rejected it but the textbook recurrence did not; report the smallest.
    d = np.diag(l) ** 2
    k = int(np.argmin(d))
    return k, float(d[k])


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a`` by Cholesky."""
    a = check_symmetric(a)
    b = np.asarray(b, dtype=float)
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(*_first_bad_pivot(a)) from None
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def normalized_laplacian(g: ConceptGraph, use_weights: bool = True) -> np.ndarray:
    """``I' - D^-1/2 A D^-1/2`` where ``I'`` is zero on isolated nodes."""
    a = g.adjacency(use_weights)
    return laplacian_from_adjacency(a)


def laplacian_from_adjacency(a: np.ndarray) -> np.ndarray:
    deg = a.sum(axis=1)
    active = deg > 0
    inv_sqrt = np.zeros_like(deg)
    inv_sqrt[active] = 1.0 / np.sqrt(deg[active])
    lap = -(inv_sqrt[:, None] * a * inv_sqrt[None, :])
    lap[np.diag_indices_from(lap)] += active.astype(float)
    # exact symmetry for the eigensolver
    return (lap + lap.T) / 2.0


def active_laplacian(g: ConceptGraph, use_weights: bool = True) -> tuple[np.ndarray, int]:
    """Normalized Laplacian restricted to non-isolated nodes, plus the isolated count.

    Isolated nodes have all-zero rows and columns, so the full spectrum is this
    block's spectrum plus one zero per isolated node.
    """
    active = g.active_nodes()
    a = g.adjacency(use_weights)[np.ix_(active, active)]
    return laplacian_from_adjacency(a), g.node_count - active.size


def bin_indices(values: np.ndarray, bins: int, lo: float, hi: float) -> np.ndarray:
    pos = (np.asarray(values, dtype=float) - lo) * (bins / (hi - lo))
    idx = np.floor(pos + BIN_EDGE_TOL)
    return np.clip(idx, 0, bins - 1).astype(np.int64)


def histogram(
    values,
    bins: int,
    range: tuple[float, float],
    normalize: bool = False,
    weights=None,
) -> np.ndarray:
    """Equal-width histogram over ``range``.

    Bins are half-open ``[e_i, e_{i+1})`` except the last, which is closed.
    Out-of-range values clamp into the first or last bin.
    """
    lo, hi = range
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not lo < hi:
        raise ValueError("histogram range must satisfy lo < hi")
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        return np.zeros(bins)
    counts = np.bincount(
        bin_indices(values, bins, lo, hi),
        weights=None if weights is None else np.asarray(weights, dtype=float).ravel(),
        minlength=bins,
    ).astype(float)
    if normalize:
        total = counts.sum()
        if total > 0:
            counts /= total
    return counts
