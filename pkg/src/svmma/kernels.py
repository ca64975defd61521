"""Radial kernels, L_q distances and kernel weight vectors."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

KERNELS = ("gaussian", "bisquare")

_GAUSS_CONST = 1.0 / (2.0 * np.pi)


def _check_kind(kind):
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel {kind!r}; expected one of {KERNELS}")


def _check_q(q):
    if not q >= 1:
        raise ValueError(f"distance order q must be >= 1, got {q}")


def distance(a, b, q: float = 2.0) -> float:
    """L_q distance between two points in the plane."""
    _check_q(q)
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if np.isinf(q):
        return float(d.max())
    return float(np.sum(d**q) ** (1.0 / q))


def pairwise_distances(a, b=None, q: float = 2.0) -> np.ndarray:
    """Matrix of L_q distances between the rows of ``a`` and ``b``."""
    _check_q(q)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = a if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    if q == 2:
        return cdist(a, b, "euclidean")
    if q == 1:
        return cdist(a, b, "cityblock")
    if np.isinf(q):
        return cdist(a, b, "chebyshev")
    return cdist(a, b, "minkowski", p=q)


def max_extent(locations, q: float = 2.0) -> float:
    """Largest pairwise L_q distance among ``locations``."""
    return float(pairwise_distances(locations, q=q).max())


def kernel_eval(kind: str, r):
    """Unscaled radial kernel K(r) for r >= 0.

    gaussian: exp(-r^2 / 2) / (2 pi); bisquare: (1 - r^2)^2 on [0, 1], zero beyond.
    """
    _check_kind(kind)
    r = np.asarray(r, dtype=float)
    if kind == "gaussian":
        out = _GAUSS_CONST * np.exp(-0.5 * r * r)
    else:
        out = np.where(np.abs(r) <= 1.0, (1.0 - r * r) ** 2, 0.0)
    return out if out.ndim else float(out)


def scaled_kernel(kind: str, h: float, d, scale: float = 1.0):
    """K(d / h) / h^2, optionally multiplied by a positive constant ``scale``."""
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    return scale * kernel_eval(kind, np.asarray(d, dtype=float) / h) / (h * h)


def weight_diagonal(locations, s, kind: str, h: float, q: float = 2.0, scale: float = 1.0):
    """Diagonal of the spatial weight matrix at regression point ``s``."""
    d = pairwise_distances(np.asarray(s, dtype=float)[None, :], locations, q=q)[0]
    return scaled_kernel(kind, h, d, scale)


def weight_matrix(distances, kind: str, h: float, scale: float = 1.0) -> np.ndarray:
    """Kernel weights for a (k, n) matrix of target-to-data distances.

    Row j is the weight diagonal at target j; pass a cached distance
    matrix to avoid recomputing distances across bandwidths.
    """
    return scaled_kernel(kind, h, distances, scale)
