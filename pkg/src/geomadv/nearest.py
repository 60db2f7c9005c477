"""Exact nearest-neighbor classification with cover-based robustness certificates.

Ties are broken by lowest training index, which makes classification
deterministic; the tree-accelerated path recomputes candidate distances with
the same kernel as brute force, so both modes return identical neighbors,
ties included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covers import (
    CoverCheck,
    CoverConfig,
    CoverScheme,
    LabeledDataset,
    sample_tube_points,
    verify_cover,
)
from .geometry import GeometryError, ManifoldSpec, NormKind, reach_for_norm
from .metrics import pairwise_distances


class NnIndex:
    """Immutable nearest-neighbor index over labeled training points.

    ``acceleration`` is "brute" or "tree"; the spatial tree only handles L2
    (L-inf stays brute-force, datasets here are small enough).
    """

    def __init__(
        self,
        points: np.ndarray,
        labels: np.ndarray,
        norm: NormKind = NormKind.L2,
        acceleration: str = "brute",
    ):
        self.points = np.array(points, dtype=np.float64, copy=True)
        self.labels = np.array(labels, dtype=np.int64, copy=True)
        if self.points.ndim != 2 or len(self.points) != len(self.labels):
            raise GeometryError("index needs matching 2-d points and labels")
        if len(self.points) == 0:
            raise GeometryError("cannot build an index over an empty training set")
        if acceleration not in ("brute", "tree"):
            raise GeometryError(f"unknown acceleration {acceleration!r}")
        if acceleration == "tree" and norm is not NormKind.L2:
            raise GeometryError("tree acceleration supports the L2 norm only")
        self.norm = norm
        self.acceleration = acceleration
        self.points.setflags(write=False)
        self.labels.setflags(write=False)
        self._tree = None
        if acceleration == "tree":
            from scipy.spatial import cKDTree

            self._tree = cKDTree(self.points)

    @classmethod
    def from_dataset(
        cls, ds: LabeledDataset, norm: NormKind = NormKind.L2, acceleration: str = "brute"
    ) -> "NnIndex":
        return cls(ds.points, ds.labels, norm=norm, acceleration=acceleration)

    def __len__(self) -> int:
        return len(self.points)


def _query_distances(index: NnIndex, query: np.ndarray, subset=None) -> np.ndarray:
    """Canonical per-query distance kernel.

    Every classification path (brute force, tree candidates, batch) funnels
    through this single-query computation so distances and tie decisions are
    identical regardless of batching or acceleration.  Squared distances are
    built from the Gram expansion per training point; each entry is an
    independent dot product, so values do not depend on which other points
    or queries are evaluated alongside.
    """
    pts = index.points if subset is None else index.points[subset]
    return pairwise_distances(query[None, :], pts, index.norm)[0]


def _tree_candidates(index: NnIndex, query: np.ndarray, k: int) -> np.ndarray:
    """Indices guaranteed to contain the true k nearest, via an inflated tree radius."""
    dist, _ = index._tree.query(query, k=k)
    radius = float(np.max(np.atleast_1d(dist)))
    radius = radius * (1.0 + 1e-9) + 1e-12
    cand = index._tree.query_ball_point(query, radius)
    return np.asarray(cand, dtype=np.int64)


def k_nearest(index: NnIndex, query: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and distances of the k nearest training points, ascending,
    ties broken by training index."""
    if k < 1:
        raise GeometryError(f"k must be >= 1, got {k}")
    if k > len(index):
        raise GeometryError(f"k={k} exceeds index size {len(index)}")
    q = np.asarray(query, dtype=np.float64)
    if index.acceleration == "tree":
        cand = _tree_candidates(index, q, k)
        dists = _query_distances(index, q, subset=cand)
        order = np.lexsort((cand, dists))[:k]
        return cand[order], dists[order]
    dists = _query_distances(index, q)
    order = np.lexsort((np.arange(len(dists)), dists))[:k]
    return order, dists[order]


def classify(index: NnIndex, query: np.ndarray) -> tuple[int, float]:
    """(label, distance) of the nearest training point; lowest index wins ties."""
    idxs, dists = k_nearest(index, query, 1)
    return int(index.labels[idxs[0]]), float(dists[0])


def classify_batch(index: NnIndex, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-neighbor labels and distances for many queries.

    Each query runs through the same single-query kernel as
    :func:`classify`, so batching cannot flip tie decisions.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    labels = np.empty(len(q), dtype=np.int64)
    out_d = np.empty(len(q))
    for i in range(len(q)):
        if index.acceleration == "tree":
            cand = _tree_candidates(index, q[i], 1)
            dists = _query_distances(index, q[i], subset=cand)
            best = np.lexsort((cand, dists))[0]
            j, d = int(cand[best]), dists[best]
        else:
            dists = _query_distances(index, q[i])
            j = int(np.argmin(dists))
            d = dists[j]
        labels[i] = index.labels[j]
        out_d[i] = d
    return labels, out_d


@dataclass(frozen=True)
class RobustnessCertificate:
    """Cover-based sampling certificate for nearest-neighbor robustness.

    ``condition`` names the inequality used: "3.1" (nearest neighbor,
    delta <= 2*(rch - eps)), "3.2" (ball-based learner, delta <= rch - eps),
    or "8" (nearest neighbor under Hausdorff noise tau,
    delta <= 2*(rch - eps) - tau).
    """

    eps: float
    delta_measured: float
    rch: float
    condition: str
    holds: bool
    tau: float = 0.0
    probe_errors: int = 0
    n_probe: int = 0

    def bound(self) -> float:
        if self.condition == "3.1":
            return 2.0 * (self.rch - self.eps)
        if self.condition == "3.2":
            return self.rch - self.eps
        return 2.0 * (self.rch - self.eps) - self.tau


def certify(
    index: NnIndex,
    spec: ManifoldSpec,
    eps: float,
    norm: NormKind = NormKind.L2,
    tau: float = 0.0,
    n_probe: int = 10_000,
    seed: int = 0,
    learner: str = "nn",
) -> RobustnessCertificate:
    """Estimate the training set's cover radius and check the sampling condition.

    ``delta_measured`` is a Monte Carlo estimate (``n_probe`` manifold
    probes).  A confirmation pass classifies ``n_probe`` points sampled from
    the eps-tube and reports the error count, which must be zero whenever
    the certificate holds.
    """
    if learner not in ("nn", "ball"):
        raise GeometryError(f"unknown learner {learner!r}")
    if tau < 0:
        raise GeometryError(f"tau must be >= 0, got {tau}")
    if learner == "ball" and tau > 0:
        raise GeometryError("the noise condition is only available for the nn learner")
    rch = reach_for_norm(spec, norm)
    if eps >= rch:
        raise GeometryError(
            f"eps={eps} >= reach={rch}: no robustness certificate exists at this radius"
        )
    ds = LabeledDataset(
        index.points.copy(),
        index.labels.copy(),
        spec,
        provenance=CoverConfig(scheme=CoverScheme.RANDOM_UNIFORM, n_per_class=1, seed=seed),
    )
    check: CoverCheck = verify_cover(ds, delta=np.inf, norm=norm, n_probe=n_probe, seed=seed)
    delta_measured = check.worst_gap

    if learner == "ball":
        condition = "3.2"
        bound = rch - eps
    elif tau > 0:
        condition = "8"
        bound = 2.0 * (rch - eps) - tau
    else:
        condition = "3.1"
        bound = 2.0 * (rch - eps)
    holds = bool(delta_measured <= bound)

    rng = np.random.default_rng([seed, 0x7E57])
    probes, probe_labels = sample_tube_points(spec, n_probe, eps, norm, rng)
    predicted, _ = classify_batch(index, probes)
    errors = int(np.sum(predicted != probe_labels))
    return RobustnessCertificate(
        eps=eps,
        delta_measured=delta_measured,
        rch=rch,
        condition=condition,
        holds=holds,
        tau=tau,
        probe_errors=errors,
        n_probe=n_probe,
    )
