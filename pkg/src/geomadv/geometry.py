"""Analytic geometry of the synthetic class manifolds.

Two families are supported:

* concentric spheres (circles when the intrinsic dimension is 1) living in
  the first ``k+1`` ambient coordinates, remaining coordinates zero;
* a pair of parallel bounded k-flats spanning the first ``k`` coordinates
  and separated along the *last* ambient coordinate.

All distances, tube-membership tests, normal spaces and separation checks
are exact closed forms except the L-inf distance to a sphere, which is
solved numerically (see :func:`_linf_sphere_subspace_distance`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Absolute tolerance for "this point lies on the manifold" checks.  The
# generators place points exactly up to floating-point rounding.
ON_MANIFOLD_TOL = 1e-6

# Floating-point slack for sharp tube-membership thresholds.
TUBE_SLACK = 1e-9


class GeometryError(ValueError):
    """Invalid geometric input (bad spec parameters, off-manifold point, ...)."""


class DimensionMismatchError(GeometryError):
    """A point's coordinate count disagrees with the spec's ambient dimension."""


class NormKind(Enum):
    """Which norm governs distances, balls, attacks and reach computations."""

    L2 = "l2"
    LINF = "linf"


def vector_norms(vecs: np.ndarray, norm: NormKind) -> np.ndarray:
    """Row-wise norms of a 2-d array under the given norm."""
    if norm is NormKind.L2:
        return np.linalg.norm(vecs, axis=-1)
    return np.max(np.abs(vecs), axis=-1)


@dataclass(frozen=True)
class ConcentricSpheres:
    """Two concentric k-spheres of radii ``r1 < r2`` in the first k+1 axes."""

    r1: float
    r2: float
    sphere_dim: int = 1

    def __post_init__(self):
        if not 0 < self.r1 < self.r2:
            raise GeometryError(f"need 0 < r1 < r2, got r1={self.r1}, r2={self.r2}")
        if self.sphere_dim < 1:
            raise GeometryError(f"sphere_dim must be >= 1, got {self.sphere_dim}")


@dataclass(frozen=True)
class ParallelFlats:
    """Two bounded k-flats: first k axes in [lo, hi], last axis 0 or ``separation``."""

    lo: float
    hi: float
    flat_dim: int = 2
    separation: float = 2.0

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise GeometryError(f"need lo <= hi, got lo={self.lo}, hi={self.hi}")
        if self.flat_dim < 1:
            raise GeometryError(f"flat_dim must be >= 1, got {self.flat_dim}")
        if self.separation <= 0:
            raise GeometryError(f"separation must be > 0, got {self.separation}")


@dataclass(frozen=True)
class ManifoldSpec:
    """A two-class data manifold family embedded in R^ambient_dim."""

    family: ConcentricSpheres | ParallelFlats
    ambient_dim: int
    class_count: int = 2

    def __post_init__(self):
        if self.class_count != 2:
            raise GeometryError("only two-class manifolds are supported")
        if self.ambient_dim < self.intrinsic_dim + 1:
            raise GeometryError(
                f"ambient_dim={self.ambient_dim} leaves no codimension for "
                f"intrinsic_dim={self.intrinsic_dim}"
            )

    @property
    def intrinsic_dim(self) -> int:
        if isinstance(self.family, ConcentricSpheres):
            return self.family.sphere_dim
        return self.family.flat_dim

    @property
    def codimension(self) -> int:
        return self.ambient_dim - self.intrinsic_dim

    def subspace_dim(self) -> int:
        """Number of leading coordinates the manifolds occupy (flats exclude the gap axis)."""
        if isinstance(self.family, ConcentricSpheres):
            return self.family.sphere_dim + 1
        return self.family.flat_dim


@dataclass(frozen=True)
class GeometrySummary:
    """Reach of the decision axis plus the embedding codimension."""

    reach_l2_decision_axis: float
    reach_linf_decision_axis_l2: float | None
    codimension: int


def summarize(spec: ManifoldSpec) -> GeometrySummary:
    """Decision-axis reach quantities for a spec.

    For spheres the L2 reach of the L2 decision axis is (r2-r1)/2 and the L2
    reach of the L-inf decision axis follows the tangent-hypercube closed
    form (see :func:`geomadv.bounds.linf_axis_offset`).  For flats only the
    L2 quantity applies.
    """
    fam = spec.family
    if isinstance(fam, ConcentricSpheres):
        from .bounds import linf_axis_offset  # local import: bounds depends on geometry

        return GeometrySummary(
            reach_l2_decision_axis=(fam.r2 - fam.r1) / 2.0,
            reach_linf_decision_axis_l2=linf_axis_offset(fam.r1, fam.r2, fam.sphere_dim),
            codimension=spec.codimension,
        )
    return GeometrySummary(
        reach_l2_decision_axis=fam.separation / 2.0,
        reach_linf_decision_axis_l2=None,
        codimension=spec.codimension,
    )


def reach_for_norm(spec: ManifoldSpec, norm: NormKind) -> float:
    """Reach of the decision axis under ``norm`` (distance measured in ``norm``).

    Flats: separation/2 under both norms (the axis is the mid-plane).
    Spheres: (r2-r1)/2 under L2; no closed form is known under L-inf.
    """
    fam = spec.family
    if isinstance(fam, ParallelFlats):
        return fam.separation / 2.0
    if norm is NormKind.L2:
        return (fam.r2 - fam.r1) / 2.0
    raise GeometryError("no closed-form L-inf reach for the sphere family")


def _check_points(points: np.ndarray, spec: ManifoldSpec) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != spec.ambient_dim:
        raise DimensionMismatchError(
            f"points have {pts.shape[1]} coordinates, spec has ambient_dim={spec.ambient_dim}"
        )
    return pts


def _check_class(spec: ManifoldSpec, class_index: int) -> None:
    if class_index not in (1, 2):
        raise GeometryError(f"class_index must be 1 or 2, got {class_index}")


def _sphere_radius(fam: ConcentricSpheres, class_index: int) -> float:
    return fam.r1 if class_index == 1 else fam.r2


def _flat_offset(fam: ParallelFlats, class_index: int) -> float:
    return 0.0 if class_index == 1 else fam.separation


def distances_to_class(
    points: np.ndarray, spec: ManifoldSpec, class_index: int, norm: NormKind = NormKind.L2
) -> np.ndarray:
    """Exact distances from each row of ``points`` to the named class manifold."""
    _check_class(spec, class_index)
    pts = _check_points(points, spec)
    fam = spec.family
    if isinstance(fam, ConcentricSpheres):
        m = fam.sphere_dim + 1
        r = _sphere_radius(fam, class_index)
        sub, pad = pts[:, :m], pts[:, m:]
        if norm is NormKind.L2:
            radial = np.linalg.norm(sub, axis=1) - r
            return np.sqrt(radial**2 + np.sum(pad**2, axis=1))
        pad_dist = np.max(np.abs(pad), axis=1) if pad.shape[1] else np.zeros(len(pts))
        sub_dist = np.array([_linf_sphere_subspace_distance(row, r) for row in sub])
        return np.maximum(sub_dist, pad_dist)

    k = fam.flat_dim
    z = _flat_offset(fam, class_index)
    in_plane = pts[:, :k]
    clamped = np.clip(in_plane, fam.lo, fam.hi)
    box_gap = in_plane - clamped
    mid = pts[:, k:-1]
    sep_gap = pts[:, -1] - z
    if norm is NormKind.L2:
        return np.sqrt(
            np.sum(box_gap**2, axis=1) + np.sum(mid**2, axis=1) + sep_gap**2
        )
    parts = [np.max(np.abs(box_gap), axis=1), np.abs(sep_gap)]
    if mid.shape[1]:
        parts.append(np.max(np.abs(mid), axis=1))
    return np.max(np.stack(parts, axis=1), axis=1)


def distance_to_class(
    point: np.ndarray, spec: ManifoldSpec, class_index: int, norm: NormKind = NormKind.L2
) -> float:
    """Distance from a single point to the named class manifold under ``norm``."""
    return float(distances_to_class(np.asarray(point)[None, :], spec, class_index, norm)[0])


def distances_to_manifold(
    points: np.ndarray, spec: ManifoldSpec, norm: NormKind = NormKind.L2
) -> np.ndarray:
    """Distances to the union of both class manifolds."""
    return np.minimum(
        distances_to_class(points, spec, 1, norm), distances_to_class(points, spec, 2, norm)
    )


def in_tube(
    point: np.ndarray, spec: ManifoldSpec, class_index: int, eps: float, norm: NormKind = NormKind.L2
) -> bool:
    """True iff the point lies within ``eps`` of the class manifold.

    A 1e-9 floating-point slack keeps exactly-on-manifold points inside the
    eps=0 tube despite rounding in the distance computation.
    """
    if eps < 0:
        raise GeometryError(f"eps must be >= 0, got {eps}")
    return distance_to_class(point, spec, class_index, norm) <= eps + TUBE_SLACK


def normal_space_basis(base_point: np.ndarray, spec: ManifoldSpec) -> np.ndarray:
    """Orthonormal basis (rows) of the normal space at an on-manifold point.

    Spheres: the radial direction within the sphere's subspace plus every
    padded axis.  Flats: every axis beyond the first ``flat_dim``.
    """
    p = _check_points(base_point, spec)[0]
    d = spec.ambient_dim
    fam = spec.family
    if isinstance(fam, ConcentricSpheres):
        m = fam.sphere_dim + 1
        sub = p[:m]
        nrm = np.linalg.norm(sub)
        if nrm == 0:
            raise GeometryError("radial direction undefined at the subspace origin")
        radial = np.zeros(d)
        radial[:m] = sub / nrm
        axes = np.eye(d)[m:]
        return np.vstack([radial[None, :], axes]) if len(axes) else radial[None, :]
    return np.eye(d)[fam.flat_dim:]


def normal_space_angle(
    perturbation: np.ndarray, base_point: np.ndarray, spec: ManifoldSpec
) -> float:
    """Angle in degrees between a perturbation and the normal space at ``base_point``.

    0 degrees means the perturbation lies in the normal space, 90 degrees
    means it is tangent.  The base point must lie on the manifold (either
    class) within ``ON_MANIFOLD_TOL``.
    """
    eta = np.asarray(perturbation, dtype=np.float64)
    p = np.asarray(base_point, dtype=np.float64)
    if eta.shape != p.shape:
        raise DimensionMismatchError("perturbation and base point dimensions differ")
    nrm = np.linalg.norm(eta)
    if nrm == 0:
        raise GeometryError("zero perturbation has no direction")
    if distances_to_manifold(p[None, :], spec)[0] > ON_MANIFOLD_TOL:
        raise GeometryError("base point does not lie on the manifold")
    basis = normal_space_basis(p, spec)
    proj_norm = np.linalg.norm(basis @ eta)
    cos = np.clip(proj_norm / nrm, 0.0, 1.0)
    return math.degrees(math.acos(cos))


def separation_sign_change(spec: ManifoldSpec, path_samples: np.ndarray) -> int | None:
    """First index where d(.,M1) - d(.,M2) changes sign along a sampled path.

    The path must start on class 1 and end on class 2 (each within
    ``ON_MANIFOLD_TOL``).  Returns the smallest index ``i >= 1`` such that the
    signed gap is negative (or zero) before ``i`` and >= 0 at ``i``; ``None``
    if no change is found (cannot happen for valid inputs on a continuous
    path, by the intermediate value theorem).
    """
    pts = _check_points(path_samples, spec)
    if len(pts) < 2:
        raise GeometryError("a path needs at least two samples")
    if distances_to_class(pts[:1], spec, 1)[0] > ON_MANIFOLD_TOL:
        raise GeometryError("path does not start on class manifold 1")
    if distances_to_class(pts[-1:], spec, 2)[0] > ON_MANIFOLD_TOL:
        raise GeometryError("path does not end on class manifold 2")
    gap = distances_to_class(pts, spec, 1) - distances_to_class(pts, spec, 2)
    signs = np.sign(gap)
    for i in range(1, len(signs)):
        if signs[i] != signs[i - 1]:
            return i
    return None


def _linf_sphere_subspace_distance(
    u: np.ndarray, r: float, restarts: int = 32, sweeps: int = 40, seed: int = 0
) -> float:
    """L-inf distance from ``u`` to the origin-centered L2 sphere of radius ``r``.

    min over unit vectors w of ||u - r*w||_inf, solved by projected
    coordinate descent on the sphere with random restarts.  Each coordinate
    update does a bounded 1-d minimization of the max-coordinate objective,
    rescaling the remaining coordinates to stay on the sphere.  There is no
    simple closed form for this distance; the solver is cross-checked
    against dense sampling in the test suite.
    """
    from scipy.optimize import minimize_scalar

    u = np.asarray(u, dtype=np.float64)
    m = len(u)
    if m == 1:
        return min(abs(u[0] - r), abs(u[0] + r))

    def objective(w):
        return np.max(np.abs(u - r * w))

    def coordinate_value(w, i, t):
        rest = math.sqrt(max(0.0, 1.0 - w[i] ** 2))
        scale = math.sqrt(max(0.0, 1.0 - t * t))
        cand = w.copy()
        if rest > 1e-12:
            cand *= scale / rest
        else:
            # w sits at +-e_i; spread the remaining mass over one other axis
            cand[:] = 0.0
            cand[(i + 1) % m] = scale
        cand[i] = t
        return cand

    rng = np.random.default_rng(seed)
    starts = []
    nrm = np.linalg.norm(u)
    if nrm > 1e-12:
        starts.append(u / nrm)
    for _ in range(restarts):
        g = rng.normal(size=m)
        starts.append(g / np.linalg.norm(g))

    best = math.inf
    grid = np.linspace(-1.0, 1.0, 33)
    for w0 in starts:
        w = w0.copy()
        f = objective(w)
        for _ in range(sweeps):
            improved = False
            for i in range(m):
                cands = [coordinate_value(w, i, t) for t in grid]
                vals = [objective(c) for c in cands]
                j = int(np.argmin(vals))
                lo_t = grid[max(0, j - 1)]
                hi_t = grid[min(len(grid) - 1, j + 1)]
                res = minimize_scalar(
                    lambda t: objective(coordinate_value(w, i, t)),
                    bounds=(lo_t, hi_t),
                    method="bounded",
                    options={"xatol": 1e-12},
                )
                t_best, f_best = (res.x, res.fun) if res.fun < vals[j] else (grid[j], vals[j])
                if f_best < f - 1e-15:
                    w = coordinate_value(w, i, t_best)
                    f = f_best
                    improved = True
            if not improved:
                break
        best = min(best, f)
    return float(best)
