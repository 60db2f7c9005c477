"""Closed-form robustness and sample-complexity bounds, plus Monte Carlo estimators.

Every gamma-bearing expression is evaluated in log space via ``gammaln`` and
exponentiated only at the end, so dimensions in the tens of thousands do not
overflow.  Calculators report values raw: a bound may exceed 1 or drop below
1 where it is vacuous, and interpretation is the caller's job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .geometry import (
    ConcentricSpheres,
    GeometryError,
    ManifoldSpec,
    NormKind,
    distances_to_class,
)

ARCCOS_GUARD = 1e-12


class BoundDomainError(GeometryError):
    """Inputs outside a formula's domain (a diverging or undefined bound)."""


@dataclass(frozen=True)
class BoundResult:
    """A bound value with its natural log and the inputs that produced it."""

    value: float
    log_value: float
    formula_id: str
    inputs: dict

    def row(self) -> dict:
        out = {"formula_id": self.formula_id}
        out.update(self.inputs)
        out["value"] = self.value
        out["log_value"] = self.log_value
        return out


def _from_log(log_value: float, formula_id: str, inputs: dict) -> BoundResult:
    value = math.exp(log_value) if log_value < 709.0 else math.inf
    return BoundResult(value=value, log_value=log_value, formula_id=formula_id, inputs=inputs)


def linf_axis_offset(r1: float, r2: float, d: int) -> float:
    """Half-width of the L-inf ball tangent to the inner sphere with corners on the outer.

    For concentric d-spheres (ambient dimension d+1) of radii r1 < r2 this is

        (-2*r1 + sqrt(r1^2 + 3*r2^2 + d*(r2^2 - r1^2))) / (d + 3),

    which scales as O(1/sqrt(d)): an L-inf-optimal decision boundary sits
    within O(1/sqrt(d)) of the inner sphere in the L2 norm.
    """
    if not 0 < r1 < r2:
        raise BoundDomainError(f"need 0 < r1 < r2, got r1={r1}, r2={r2}")
    if d < 1:
        raise BoundDomainError(f"need d >= 1, got {d}")
    return (-2.0 * r1 + math.sqrt(r1**2 + 3.0 * r2**2 + d * (r2**2 - r1**2))) / (d + 3.0)


def nn_cover_bound(rch: float, eps: float) -> float:
    """Largest cover spacing that certifies a nearest-neighbor classifier on the eps-tube."""
    _check_rch_eps(rch, eps)
    return 2.0 * (rch - eps)


def l_cover_bound(rch: float, eps: float) -> float:
    """Largest cover spacing that certifies ball-based adversarial training on the eps-tube."""
    _check_rch_eps(rch, eps)
    return rch - eps


def _check_rch_eps(rch: float, eps: float) -> None:
    if rch <= 0:
        raise BoundDomainError(f"reach must be > 0, got {rch}")
    if not 0 <= eps < rch:
        raise BoundDomainError(
            f"need 0 <= eps < reach for a robustness guarantee, got eps={eps}, reach={rch}"
        )


def nn_noise_cover_bound(rch: float, eps: float, tau: float) -> float:
    """Nearest-neighbor cover spacing under Hausdorff noise: 2*(rch - eps) - tau."""
    _check_rch_eps(rch, eps)
    if tau < 0 or tau >= rch:
        raise BoundDomainError(f"need 0 <= tau < reach, got tau={tau}")
    bound = 2.0 * (rch - eps) - tau
    if bound <= 0:
        raise BoundDomainError(
            f"noise bound 2*(rch-eps)-tau = {bound:.6g} is nonpositive; "
            "no cover spacing can certify this (eps, tau) pair"
        )
    return bound


def sampling_gap_ratio(k: int, eps: float) -> float:
    """Minimum-training-set size ratio, ball-based learner over nearest neighbor.

    Exact value 2^k * (1+eps)^(-k/2), which is at least 2^(k/2) for eps in
    [0, 1]: the factor-of-2 difference in certified cover spacing becomes an
    exponential-in-k gap in sample count.
    """
    if k < 1:
        raise BoundDomainError(f"need k >= 1, got {k}")
    if not 0 <= eps <= 1:
        raise BoundDomainError(f"need 0 <= eps <= 1, got {eps}")
    ratio = 2.0**k * (1.0 + eps) ** (-k / 2.0)
    assert ratio >= 2.0 ** (k / 2.0) * (1.0 - 1e-12), "gap ratio fell below 2^(k/2)"
    return ratio


def coverage_ratio_bound(
    k: int, d: int, eps: float, vol_k_manifold: float, n_samples: int
) -> BoundResult:
    """Upper bound on the fraction of the manifold's eps-tube covered by sample balls.

    pi^(k/2) * Gamma((d-k)/2 + 1) / Gamma(d/2 + 1) * eps^k * n / vol_k(M).
    """
    _check_k_d(k, d)
    if eps <= 0:
        raise BoundDomainError(f"need eps > 0, got {eps}")
    if vol_k_manifold <= 0 or n_samples < 1:
        raise BoundDomainError("need vol_k_manifold > 0 and n_samples >= 1")
    log_v = (
        (k / 2.0) * math.log(math.pi)
        + gammaln((d - k) / 2.0 + 1.0)
        - gammaln(d / 2.0 + 1.0)
        + k * math.log(eps)
        + math.log(n_samples)
        - math.log(vol_k_manifold)
    )
    inputs = {"k": k, "d": d, "eps": eps, "vol_k": vol_k_manifold, "n": n_samples}
    return _from_log(log_v, "coverage_ratio", inputs)


def plane_coverage_bound(k: int, d: int) -> BoundResult:
    """Tube-coverage bound for a bounded k-flat sampled on the covering grid.

    pi^(k/2) * Gamma((d-k)/2 + 1) / Gamma(d/2 + 1) * (sqrt(k)/2)^k; the grid
    spacing and side length cancel, leaving a pure function of (k, d).
    """
    _check_k_d(k, d)
    log_v = (
        (k / 2.0) * math.log(math.pi)
        + gammaln((d - k) / 2.0 + 1.0)
        - gammaln(d / 2.0 + 1.0)
        + k * math.log(math.sqrt(k) / 2.0)
    )
    return _from_log(log_v, "plane_coverage", {"k": k, "d": d})


def tube_cover_sample_lower_bound(k: int, d: int, lo: float, hi: float) -> BoundResult:
    """Minimum unit-ball count needed to cover the 1-tube of a bounded k-flat.

    pi^(-k/2) * Gamma(d/2 + 1) / Gamma((d-k)/2 + 1) * (hi-lo)^k, growing as
    Omega((d-k)^(k/2)) while a 1-cover of the flat itself stays constant in d.
    """
    _check_k_d(k, d)
    if lo >= hi:
        raise BoundDomainError(f"need lo < hi, got lo={lo}, hi={hi}")
    log_v = (
        -(k / 2.0) * math.log(math.pi)
        + gammaln(d / 2.0 + 1.0)
        - gammaln((d - k) / 2.0 + 1.0)
        + k * math.log(hi - lo)
    )
    return _from_log(log_v, "tube_cover_samples", {"k": k, "d": d, "lo": lo, "hi": hi})


def sphere_coverage_bound(n: int, d: int, eps: float) -> BoundResult:
    """Fraction of the unit d-sphere's eps-tube covered by n sample balls.

    n * eps^d / ((1+eps)^d - (1-eps)^d), evaluated in log space.  Only
    defined for eps <= 1 (past the inner radius the tube volume formula
    changes shape).
    """
    if d < 1 or n < 1:
        raise BoundDomainError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
    if not 0 < eps <= 1:
        raise BoundDomainError(f"need 0 < eps <= 1, got {eps}")
    if eps == 1.0:
        log_den = d * math.log(2.0)
    else:
        ratio = (1.0 - eps) / (1.0 + eps)
        log_den = d * math.log1p(eps) + math.log1p(-(ratio**d))
    log_v = math.log(n) + d * math.log(eps) - log_den
    return _from_log(log_v, "sphere_coverage", {"n": n, "d": d, "eps": eps})


def segment_count_lower_bound(r1: float, r2: float, eps: float = 0.0) -> float:
    """Minimum line-segment count for a decision boundary robust between two circles.

    pi / arccos((r1 + eps) / (r2 - eps)).  The argument is clamped only
    within a 1e-12 guard band; anything past it is an error because the
    bound has genuinely diverged.
    """
    if not 0 < r1 < r2:
        raise BoundDomainError(f"need 0 < r1 < r2, got r1={r1}, r2={r2}")
    if eps < 0:
        raise BoundDomainError(f"need eps >= 0, got {eps}")
    if r1 + eps >= r2 - eps:
        raise BoundDomainError("gap closed; bound diverges")
    arg = (r1 + eps) / (r2 - eps)
    if arg >= 1.0 + ARCCOS_GUARD:
        raise BoundDomainError("gap closed; bound diverges")
    arg = min(arg, 1.0)
    if arg == 1.0:
        raise BoundDomainError("gap closed; bound diverges")
    return math.pi / math.acos(arg)


def linear_region_lower_bound(r1: float, rch: float, tau: float, d: int) -> BoundResult:
    """Minimum linear-region count for a ReLU net whose boundary stays in a tau-tube.

    2*sqrt(pi) * Gamma((d+1)/2) / Gamma(d/2) * ((r1 + rch) / (4*tau))^((d-1)/2).
    """
    if d < 2:
        raise BoundDomainError(f"need d >= 2, got {d}")
    if tau <= 0:
        raise BoundDomainError("tau must be > 0 (the bound diverges at tau=0)")
    if tau > rch or rch <= 0 or r1 <= 0:
        raise BoundDomainError(f"need 0 < tau <= rch and r1 > 0, got tau={tau}, rch={rch}, r1={r1}")
    log_v = (
        math.log(2.0)
        + 0.5 * math.log(math.pi)
        + gammaln((d + 1) / 2.0)
        - gammaln(d / 2.0)
        + ((d - 1) / 2.0) * math.log((r1 + rch) / (4.0 * tau))
    )
    return _from_log(log_v, "linear_regions", {"r1": r1, "rch": rch, "tau": tau, "d": d})


@dataclass(frozen=True)
class MedialProximity:
    t_star: float
    dist_bound: float


def medial_proximity_bound(
    delta: float, omega1: float, omega2: float, rch: float = 1.0
) -> MedialProximity:
    """How close a nearest-neighbor decision-boundary point must be to the decision axis.

    t_star = (delta^2 + (omega2^2 - omega1^2) + 2*delta*omega2) / (1 + (omega2^2 - omega1^2))
    and the distance bound is t_star * omega2 * rch.
    """
    if not 0 <= omega1 < omega2 < 1:
        raise BoundDomainError(
            f"need 0 <= omega1 < omega2 < 1, got omega1={omega1}, omega2={omega2}"
        )
    if not 0 <= delta < 1:
        raise BoundDomainError(f"need 0 <= delta < 1, got {delta}")
    if rch <= 0:
        raise BoundDomainError(f"need rch > 0, got {rch}")
    gap = omega2**2 - omega1**2
    t_star = (delta**2 + gap + 2.0 * delta * omega2) / (1.0 + gap)
    return MedialProximity(t_star=t_star, dist_bound=t_star * omega2 * rch)


def _check_k_d(k: int, d: int) -> None:
    if not 1 <= k < d:
        raise BoundDomainError(f"need 1 <= k < d, got k={k}, d={d}")


@dataclass(frozen=True)
class AccuracyEstimate:
    """Monte Carlo estimate of the best achievable accuracy on overlapping tubes."""

    value: float
    std_error: float
    n_union: int
    n_intersection: int


def _tube_bounding_box(spec: ManifoldSpec, eps: float) -> tuple[np.ndarray, np.ndarray]:
    d = spec.ambient_dim
    fam = spec.family
    lo = np.full(d, -eps)
    hi = np.full(d, eps)
    if isinstance(fam, ConcentricSpheres):
        m = fam.sphere_dim + 1
        lo[:m] = -(fam.r2 + eps)
        hi[:m] = fam.r2 + eps
    else:
        k = fam.flat_dim
        lo[:k] = fam.lo - eps
        hi[:k] = fam.hi + eps
        lo[-1] = -eps
        hi[-1] = fam.separation + eps
    return lo, hi


def accuracy_upper_bound_mc(
    spec: ManifoldSpec,
    eps: float,
    norm: NormKind = NormKind.L2,
    n_mc: int = 10**6,
    seed: int = 0,
    block: int = 1 << 17,
) -> AccuracyEstimate:
    """Best-case accuracy on the union of class tubes, assuming a uniform distribution.

    Rejection sampling over the union's bounding box estimates the overlap
    fraction; the result is 1 - overlap/2 with a binomial standard error.
    Blocks draw from counter-derived streams, so the estimate is a pure
    function of (seed, n_mc, block).
    """
    if eps <= 0:
        raise BoundDomainError(f"need eps > 0, got {eps}")
    lo, hi = _tube_bounding_box(spec, eps)
    n_union = 0
    n_inter = 0
    done = 0
    block_idx = 0
    while done < n_mc:
        take = min(block, n_mc - done)
        rng = np.random.default_rng([seed, block_idx])
        pts = rng.uniform(lo, hi, size=(take, spec.ambient_dim))
        in1 = distances_to_class(pts, spec, 1, norm) <= eps
        in2 = distances_to_class(pts, spec, 2, norm) <= eps
        n_union += int(np.sum(in1 | in2))
        n_inter += int(np.sum(in1 & in2))
        done += take
        block_idx += 1
    if n_union == 0:
        raise BoundDomainError(
            f"no Monte Carlo samples landed in the union tube after {n_mc} draws; increase n_mc"
        )
    p = n_inter / n_union
    se = 0.5 * math.sqrt(p * (1.0 - p) / n_union)
    return AccuracyEstimate(
        value=1.0 - 0.5 * p, std_error=se, n_union=n_union, n_intersection=n_inter
    )
