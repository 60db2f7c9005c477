"""Adversarial example generation: FGSM, BIM, PGD, a gradient-free projection
attack, and a neighbor-walking attack on nearest-neighbor classifiers.

All gradient attacks share one projected-iteration core, so FGSM is exactly
BIM with a single full-size step.  Perturbations are tracked in delta space:
the returned points are ``x + delta`` with ``delta`` projected into the
eps-ball after every step, which keeps ball constraints exact up to a 1e-9
recomputation slack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, NormKind, vector_norms
from .mlp import MlpModel, PgdConfig, input_gradients


@dataclass(frozen=True)
class AttackConfig:
    """CLI-facing attack description."""

    method: str  # fgsm | bim | pgd | gradient_free | nn_walk
    eps: float
    norm: NormKind = NormKind.L2
    step: float = 0.05
    iters: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("fgsm", "bim", "pgd", "gradient_free", "nn_walk"):
            raise GeometryError(f"unknown attack method {self.method!r}")
        if self.eps < 0:
            raise GeometryError(f"eps must be >= 0, got {self.eps}")
        if self.method != "fgsm" and (self.iters < 1 or self.step <= 0):
            raise GeometryError("iterative methods need iters >= 1 and step > 0")


@dataclass
class AttackOutcome:
    """Adversarial points plus bookkeeping.

    ``success_mask`` marks rows whose prediction differs from the *true*
    label.  ``perturbations`` is the delta matrix (adversarial - original);
    ``perturbation_norms`` are its row norms in the attack's norm.
    ``zero_grad_mask`` flags rows left unperturbed because the loss gradient
    vanished there.
    """

    adversarial_points: np.ndarray
    success_mask: np.ndarray
    perturbation_norms: np.ndarray
    perturbations: np.ndarray
    zero_grad_mask: np.ndarray | None = None

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.success_mask))


def project_into_ball(delta: np.ndarray, eps: float, norm: NormKind) -> np.ndarray:
    """Project perturbation rows into the eps-ball (coordinate clamp / radial rescale)."""
    if norm is NormKind.LINF:
        return np.clip(delta, -eps, eps)
    norms = np.linalg.norm(delta, axis=1)
    outside = norms > eps
    if np.any(outside):
        delta = delta.copy()
        delta[outside] *= (eps / norms[outside])[:, None]
    return delta


def uniform_ball_starts(
    n: int, dim: int, eps: float, norm: NormKind, seed: int
) -> np.ndarray:
    """Per-row random starts inside the eps-ball, stream derived from (seed, row)."""
    out = np.empty((n, dim))
    for row in range(n):
        rng = np.random.default_rng([seed, row])
        if norm is NormKind.LINF:
            out[row] = rng.uniform(-eps, eps, size=dim)
        else:
            g = rng.normal(size=dim)
            g /= np.linalg.norm(g)
            out[row] = eps * rng.uniform() ** (1.0 / dim) * g
    return out


def _iterate_gradient_attack(
    model: MlpModel,
    points: np.ndarray,
    labels: np.ndarray,
    eps: float,
    norm: NormKind,
    step: float,
    iters: int,
    random_start: bool = False,
    seed: int = 0,
    clip: tuple[float, float] | None = None,
) -> AttackOutcome:
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    n, d = x.shape
    if random_start and eps > 0:
        delta = project_into_ball(uniform_ball_starts(n, d, eps, norm, seed), eps, norm)
        if clip is not None:
            delta = np.clip(x + delta, clip[0], clip[1]) - x
    else:
        delta = np.zeros_like(x)

    zero_grad = None
    for it in range(iters):
        grad = input_gradients(model, x + delta, y)
        if norm is NormKind.LINF:
            move = step * np.sign(grad)
        else:
            norms = np.linalg.norm(grad, axis=1)
            move = np.zeros_like(grad)
            nz = norms > 0
            move[nz] = step * grad[nz] / norms[nz, None]
        if it == 0:
            zero_grad = ~np.any(grad != 0.0, axis=1)
        delta = project_into_ball(delta + move, eps, norm)
        if clip is not None:
            delta = np.clip(x + delta, clip[0], clip[1]) - x

    adv = x + delta
    success = model.predict(adv) != y
    return AttackOutcome(
        adversarial_points=adv,
        success_mask=success,
        perturbation_norms=vector_norms(delta, norm),
        perturbations=delta,
        zero_grad_mask=zero_grad,
    )


def fgsm(
    model: MlpModel,
    points: np.ndarray,
    labels: np.ndarray,
    eps: float,
    norm: NormKind = NormKind.L2,
    clip: tuple[float, float] | None = None,
) -> AttackOutcome:
    """One full-size gradient step: sign of the gradient under L-inf, the
    normalized gradient under L2.  Zero-gradient rows stay put and are flagged."""
    return _iterate_gradient_attack(
        model, points, labels, eps, norm, step=eps, iters=1, clip=clip
    )


def bim(
    model: MlpModel,
    points: np.ndarray,
    labels: np.ndarray,
    eps: float,
    norm: NormKind = NormKind.L2,
    step: float = 0.05,
    iters: int = 30,
    clip: tuple[float, float] | None = None,
) -> AttackOutcome:
    """Iterated FGSM steps, re-projected onto the eps-ball after every step."""
    return _iterate_gradient_attack(
        model, points, labels, eps, norm, step=step, iters=iters, clip=clip
    )


def pgd(
    model: MlpModel,
    points: np.ndarray,
    labels: np.ndarray,
    cfg: PgdConfig,
    seed: int = 0,
    clip: tuple[float, float] | None = None,
) -> AttackOutcome:
    """BIM with an optional uniform random start inside the eps-ball (seeded)."""
    return _iterate_gradient_attack(
        model,
        points,
        labels,
        cfg.eps,
        cfg.norm,
        step=cfg.step,
        iters=cfg.iters,
        random_start=cfg.random_start,
        seed=seed,
        clip=clip,
    )


def pgd_points(
    model: MlpModel,
    points: np.ndarray,
    labels: np.ndarray,
    cfg: PgdConfig,
    seed: int = 0,
    clip: tuple[float, float] | None = None,
) -> np.ndarray:
    """Just the perturbed points; the adversarial-training inner loop."""
    return pgd(model, points, labels, cfg, seed=seed, clip=clip).adversarial_points


def gradient_free_projection(
    oracle,
    test_points: np.ndarray,
    labels: np.ndarray,
    r: float,
    norm: NormKind = NormKind.L2,
) -> AttackOutcome:
    """Oracle-only attack: project every other test point onto the boundary of
    B(x, r) and keep the first projection the oracle classifies differently
    from x's own prediction.

    ``oracle`` maps a batch of points to predicted classes.  Perturbation
    norms are 0 (no boundary point changed the prediction) or exactly ``r``.
    """
    x = np.atleast_2d(np.asarray(test_points, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    n = len(x)
    if n == 0:
        raise GeometryError("test set is empty")
    base_preds = np.asarray(oracle(x))
    adv = x.copy()
    deltas = np.zeros_like(x)
    norms = np.zeros(n)
    for i in range(n):
        if r == 0:
            continue
        diff = np.delete(x, i, axis=0) - x[i]
        lengths = vector_norms(diff, norm)
        keep = lengths > 0  # duplicate points are skipped
        diff, lengths = diff[keep], lengths[keep]
        if len(diff) == 0:
            continue
        scaled = r * (diff / lengths[:, None])
        candidates = x[i] + scaled
        preds = np.asarray(oracle(candidates))
        hits = np.nonzero(preds != base_preds[i])[0]
        if len(hits):
            j = hits[0]
            deltas[i] = scaled[j]
            adv[i] = candidates[j]
            norms[i] = r
    success = np.asarray(oracle(adv)) != y
    return AttackOutcome(
        adversarial_points=adv,
        success_mask=success,
        perturbation_norms=norms,
        perturbations=deltas,
    )


def nn_walk_attack(
    index,
    point: np.ndarray,
    label: int,
    eps: float,
    step: float | None = None,
    iters: int = 50,
    k: int = 10,
    norm: NormKind | None = None,
    clip: tuple[float, float] | None = None,
) -> tuple[np.ndarray, bool]:
    """Walk away from same-class neighbors and toward other-class neighbors.

    At each iterate the direction is the normalized difference of neighbor
    means (other-class minus true-class); when one group is empty the
    nonempty group's direction relative to the current iterate is used
    alone.  Stops early on misclassification.  Returns (point, success).
    """
    from .nearest import k_nearest

    if k < 2:
        raise GeometryError(f"k must be >= 2, got {k}")
    if k > len(index.points):
        raise GeometryError(f"k={k} exceeds training set size {len(index.points)}")
    norm = index.norm if norm is None else norm
    if step is None:
        step = eps / 10.0 if eps > 0 else 0.0
    x0 = np.asarray(point, dtype=np.float64)
    z = x0.copy()

    def predicted(q):
        from .nearest import classify

        return classify(index, q)[0]

    if predicted(z) != label:
        return z, True
    for _ in range(iters):
        idxs, _ = k_nearest(index, z, k)
        nbr_pts = index.points[idxs]
        nbr_labels = index.labels[idxs]
        true_pts = nbr_pts[nbr_labels == label]
        other_pts = nbr_pts[nbr_labels != label]
        if len(true_pts) and len(other_pts):
            direction = other_pts.mean(axis=0) - true_pts.mean(axis=0)
        elif len(other_pts):
            direction = other_pts.mean(axis=0) - z
        else:
            direction = z - true_pts.mean(axis=0)
        nrm = np.linalg.norm(direction)
        if nrm == 0:
            break
        z = z + step * (direction / nrm)
        delta = project_into_ball((z - x0)[None, :], eps, norm)[0]
        z = x0 + delta
        if clip is not None:
            z = np.clip(z, clip[0], clip[1])
        if predicted(z) != label:
            return z, True
    return z, predicted(z) != label
