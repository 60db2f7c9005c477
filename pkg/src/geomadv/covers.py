"""Delta-covers and random samples of the analytic manifolds.

The grid construction follows the paper-count convention: ``m`` points per
axis with ``m = ceil(span * sqrt(k) / (2 * delta))``, endpoints included.
This reproduces the published Planes totals (450 / 1682 / 6498 for delta
1 / 0.5 / 0.25) even though the resulting worst-case gap slightly exceeds
delta (about 1.0102 for delta=1 on the 15-per-axis grid).  Pass
``strict=True`` for a grid with ``m+1`` points per axis, which is a true
delta-cover.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import (
    ON_MANIFOLD_TOL,
    ConcentricSpheres,
    GeometryError,
    ManifoldSpec,
    NormKind,
    ParallelFlats,
    distances_to_class,
)
from .metrics import nearest_distances

DEFAULT_GRID_CAP = 10**7


class CoverScheme(Enum):
    GRID_VERTICES = "grid_vertices"
    GRID_CENTERS = "grid_centers"
    RANDOM_UNIFORM = "random_uniform"


@dataclass(frozen=True)
class CoverConfig:
    """How a dataset was generated: grid spacing or per-class sample count, plus seed."""

    scheme: CoverScheme
    delta: float | None = None
    n_per_class: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.scheme in (CoverScheme.GRID_VERTICES, CoverScheme.GRID_CENTERS):
            if self.delta is None or self.delta <= 0:
                raise GeometryError(f"grid schemes need delta > 0, got {self.delta}")
        if self.scheme is CoverScheme.RANDOM_UNIFORM:
            if self.n_per_class is None or self.n_per_class < 1:
                raise GeometryError(f"random scheme needs n_per_class >= 1, got {self.n_per_class}")


@dataclass
class LabeledDataset:
    """Finite labeled point set in R^d with the spec it was sampled from.

    ``rotation``, when set, is the orthogonal matrix Q applied to canonical
    manifold points (row convention: stored = canonical @ Q.T).  Geometry
    checks undo it before dispatching to the analytic spec.
    """

    points: np.ndarray
    labels: np.ndarray
    spec: ManifoldSpec
    provenance: CoverConfig
    rotation: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.points.ndim != 2 or self.points.shape[1] != self.spec.ambient_dim:
            raise GeometryError("points shape disagrees with spec ambient_dim")
        if len(self.points) != len(self.labels):
            raise GeometryError("points and labels lengths differ")

    def __len__(self) -> int:
        return len(self.points)

    def canonical_points(self) -> np.ndarray:
        """Points mapped back to the unrotated frame of the spec."""
        if self.rotation is None:
            return self.points
        return self.points @ self.rotation

    def on_manifold_errors(self) -> np.ndarray:
        """Distance of each point to its labeled class manifold (canonical frame)."""
        pts = self.canonical_points()
        out = np.empty(len(pts))
        for cls in (1, 2):
            mask = self.labels == cls
            if mask.any():
                out[mask] = distances_to_class(pts[mask], self.spec, cls, NormKind.L2)
        return out

    def check_on_manifold(self, tol: float = ON_MANIFOLD_TOL) -> None:
        worst = float(self.on_manifold_errors().max(initial=0.0))
        if worst > tol:
            raise GeometryError(f"dataset contains off-manifold points (worst gap {worst:.3e})")


def grid_points_per_axis(spec: ManifoldSpec, delta: float, strict: bool = False) -> int:
    fam = spec.family
    if not isinstance(fam, ParallelFlats):
        raise GeometryError("grid covers are defined for the flats family only")
    if delta <= 0:
        raise GeometryError(f"delta must be > 0, got {delta}")
    k = fam.flat_dim
    m = math.ceil((fam.hi - fam.lo) * math.sqrt(k) / (2.0 * delta))
    m = max(m, 1)
    return m + 1 if strict else m


def _flat_points(spec: ManifoldSpec, axis_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All grid combinations on both flats, class 1 (offset 0) then class 2."""
    fam = spec.family
    k, d = fam.flat_dim, spec.ambient_dim
    combos = np.array(list(itertools.product(axis_values, repeat=k)), dtype=np.float64)
    n = len(combos)
    pts = np.zeros((2 * n, d))
    pts[:n, :k] = combos
    pts[n:, :k] = combos
    pts[n:, -1] = fam.separation
    labels = np.concatenate([np.ones(n, dtype=np.int64), np.full(n, 2, dtype=np.int64)])
    return pts, labels


def grid_cover_flats(
    spec: ManifoldSpec,
    delta: float,
    cap: int = DEFAULT_GRID_CAP,
    strict: bool = False,
) -> LabeledDataset:
    """Grid-vertex sample of both flats at spacing derived from ``delta``.

    Total point count is 2*m^k with m points per axis; errors out when that
    exceeds ``cap``.
    """
    fam = spec.family
    m = grid_points_per_axis(spec, delta, strict=strict)
    total = 2 * m**fam.flat_dim
    if total > cap:
        raise GeometryError(f"grid cover would need {total} points, exceeding cap {cap}")
    axis = np.linspace(fam.lo, fam.hi, m)
    pts, labels = _flat_points(spec, axis)
    cfg = CoverConfig(scheme=CoverScheme.GRID_VERTICES, delta=delta, seed=0)
    return LabeledDataset(pts, labels, spec, cfg)


def grid_cell_centers_flats(
    spec: ManifoldSpec, delta: float, strict: bool = False
) -> LabeledDataset:
    """Centers of the grid cells of :func:`grid_cover_flats` (the farthest points)."""
    fam = spec.family
    m = grid_points_per_axis(spec, delta, strict=strict)
    if m < 2:
        centers = np.array([(fam.lo + fam.hi) / 2.0])
    else:
        axis = np.linspace(fam.lo, fam.hi, m)
        centers = (axis[:-1] + axis[1:]) / 2.0
    pts, labels = _flat_points(spec, centers)
    cfg = CoverConfig(scheme=CoverScheme.GRID_CENTERS, delta=delta, seed=0)
    return LabeledDataset(pts, labels, spec, cfg)


def sphere_surface_points(
    fam: ConcentricSpheres, radius: float, n: int, ambient_dim: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform points on one sphere, zero-padded to the ambient dimension.

    Circles use uniform angles; higher sphere dimensions use normalized
    Gaussian vectors in the sphere's subspace.
    """
    pts = np.zeros((n, ambient_dim))
    if fam.sphere_dim == 1:
        theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
        pts[:, 0] = radius * np.cos(theta)
        pts[:, 1] = radius * np.sin(theta)
        return pts
    m = fam.sphere_dim + 1
    g = rng.normal(size=(n, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    pts[:, :m] = radius * g
    return pts


def random_sample_circles(spec: ManifoldSpec, n_per_class: int, seed: int) -> LabeledDataset:
    """Uniform random sample of both spheres, class 1 drawn first. Deterministic in seed."""
    fam = spec.family
    if not isinstance(fam, ConcentricSpheres):
        raise GeometryError("random_sample_circles needs the sphere family")
    if n_per_class < 1:
        raise GeometryError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = np.random.default_rng(seed)
    p1 = sphere_surface_points(fam, fam.r1, n_per_class, spec.ambient_dim, rng)
    p2 = sphere_surface_points(fam, fam.r2, n_per_class, spec.ambient_dim, rng)
    pts = np.vstack([p1, p2])
    labels = np.concatenate(
        [np.ones(n_per_class, dtype=np.int64), np.full(n_per_class, 2, dtype=np.int64)]
    )
    cfg = CoverConfig(scheme=CoverScheme.RANDOM_UNIFORM, n_per_class=n_per_class, seed=seed)
    return LabeledDataset(pts, labels, spec, cfg)


def uniform_manifold_points(
    spec: ManifoldSpec, n: int, rng: np.random.Generator, class_index: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(points, labels) drawn uniformly from the manifold (both classes unless fixed)."""
    fam = spec.family
    d = spec.ambient_dim
    if class_index is None:
        labels = rng.integers(1, 3, size=n)
    else:
        labels = np.full(n, class_index, dtype=np.int64)
    pts = np.zeros((n, d))
    if isinstance(fam, ConcentricSpheres):
        for cls, radius in ((1, fam.r1), (2, fam.r2)):
            mask = labels == cls
            if mask.any():
                pts[mask] = sphere_surface_points(fam, radius, int(mask.sum()), d, rng)
        return pts, labels
    k = fam.flat_dim
    pts[:, :k] = rng.uniform(fam.lo, fam.hi, size=(n, k))
    pts[labels == 2, -1] = fam.separation
    return pts, labels


def sample_tube_points(
    spec: ManifoldSpec,
    n: int,
    eps: float,
    norm: NormKind,
    rng: np.random.Generator,
    class_index: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Manifold points plus uniform normal-space offsets of norm <= eps.

    The offset is drawn uniformly from the codimension-dimensional ball
    (L2) or box (L-inf) in the normal space at each base point, so every
    sample lies in the eps-tube of its class.
    """
    from .geometry import normal_space_basis

    base, labels = uniform_manifold_points(spec, n, rng, class_index)
    codim = spec.codimension
    if norm is NormKind.L2:
        g = rng.normal(size=(n, codim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        radii = eps * rng.uniform(0.0, 1.0, size=n) ** (1.0 / codim)
        coeffs = g * radii[:, None]
    else:
        coeffs = rng.uniform(-eps, eps, size=(n, codim))
    fam = spec.family
    if isinstance(fam, ParallelFlats):
        pts = base.copy()
        pts[:, fam.flat_dim :] += coeffs
        return pts, labels
    # spheres: per-point normal basis (radial direction varies with the point)
    pts = base.copy()
    for i in range(n):
        basis = normal_space_basis(base[i], spec)
        pts[i] += coeffs[i] @ basis
    return pts, labels


@dataclass(frozen=True)
class CoverCheck:
    is_cover: bool
    worst_gap: float
    n_probe: int


def verify_cover(
    dataset: LabeledDataset,
    delta: float,
    norm: NormKind = NormKind.L2,
    n_probe: int = 10_000,
    seed: int = 0,
    probe_block: int = 4096,
) -> CoverCheck:
    """Monte Carlo check that every manifold point is within ``delta`` of a sample.

    Probes are drawn uniformly from the manifold in per-block counter-derived
    streams, so the result depends only on (seed, n_probe, probe_block) and
    blocks may be evaluated in parallel without changing it.
    """
    if len(dataset) == 0:
        raise GeometryError("cannot verify a cover with an empty dataset")
    worst = 0.0
    samples = dataset.canonical_points()
    done = 0
    block_idx = 0
    while done < n_probe:
        take = min(probe_block, n_probe - done)
        rng = np.random.default_rng([seed, block_idx])
        probes, _ = uniform_manifold_points(dataset.spec, take, rng)
        gaps, _ = nearest_distances(probes, samples, norm)
        worst = max(worst, float(gaps.max()))
        done += take
        block_idx += 1
    return CoverCheck(is_cover=bool(worst <= delta), worst_gap=worst, n_probe=n_probe)
