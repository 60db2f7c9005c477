"""Blockwise pairwise-distance kernels shared by covers and nearest-neighbor code.

The squared-L2 kernel uses the Gram-matrix expansion so large query/train
products run through BLAS; it is the canonical distance used everywhere so
that brute-force and tree-accelerated paths agree bit for bit.
"""

from __future__ import annotations

import numpy as np

from .geometry import NormKind


def pairwise_distances(queries: np.ndarray, points: np.ndarray, norm: NormKind) -> np.ndarray:
    """Dense (n_queries, n_points) distance matrix."""
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if norm is NormKind.L2:
        sq = np.sum(q * q, axis=1)[:, None] + np.sum(x * x, axis=1)[None, :] - 2.0 * (q @ x.T)
        return np.sqrt(np.maximum(sq, 0.0))
    return np.max(np.abs(q[:, None, :] - x[None, :, :]), axis=2)


def nearest_distances(
    queries: np.ndarray,
    points: np.ndarray,
    norm: NormKind,
    block: int = 2048,
) -> tuple[np.ndarray, np.ndarray]:
    """(distance, index) of the nearest point for each query, lowest index on ties.

    Queries are processed in blocks to bound memory; for the L-inf norm the
    point set is chunked as well.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = len(q)
    dists = np.empty(n)
    idx = np.empty(n, dtype=np.int64)
    if norm is NormKind.L2:
        x_sq = np.sum(x * x, axis=1)
        for s in range(0, n, block):
            qb = q[s : s + block]
            sq = np.sum(qb * qb, axis=1)[:, None] + x_sq[None, :] - 2.0 * (qb @ x.T)
            np.maximum(sq, 0.0, out=sq)
            j = np.argmin(sq, axis=1)
            idx[s : s + block] = j
            dists[s : s + block] = np.sqrt(sq[np.arange(len(qb)), j])
        return dists, idx
    # L-inf: no BLAS shortcut; chunk both sides
    pt_block = max(1, min(len(x), (1 << 22) // max(1, q.shape[1] * block)))
    for s in range(0, n, block):
        qb = q[s : s + block]
        best = np.full(len(qb), np.inf)
        best_j = np.zeros(len(qb), dtype=np.int64)
        for t in range(0, len(x), pt_block):
            xb = x[t : t + pt_block]
            d = np.max(np.abs(qb[:, None, :] - xb[None, :, :]), axis=2)
            j = np.argmin(d, axis=1)
            dj = d[np.arange(len(qb)), j]
            better = dj < best
            best[better] = dj[better]
            best_j[better] = j[better] + t
        dists[s : s + block] = best
        idx[s : s + block] = best_j
    return dists, idx
