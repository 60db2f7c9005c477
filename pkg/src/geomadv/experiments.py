"""Seeded experiment pipelines emitting reproducible CSV/JSON reports.

Every pipeline derives all randomness from its base seed, so re-running with
the emitted config reproduces every numeric column.  Aggregate rows carry
(n, mean, stdev); per-sample rows carry (codim, eps, seed).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__ as _version
from .attacks import bim, fgsm, nn_walk_attack
from .bounds import linf_axis_offset
from .covers import LabeledDataset
from .data import load_mnist, make_circles, make_planes, make_spheres, planes_spec, save_pgm
from .geometry import ConcentricSpheres, GeometryError, ManifoldSpec, NormKind
from .mlp import (
    MlpModel,
    PgdConfig,
    TrainConfig,
    TrainingDivergedError,
    input_gradients,
    train,
)
from .nearest import NnIndex, classify_batch


@dataclass
class ExperimentReport:
    experiment_id: str
    config: dict
    rows: list
    aggregates: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    runtime_seconds: float = 0.0

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w") as f:
            json.dump(
                {
                    "experiment_id": self.experiment_id,
                    "config": self.config,
                    "environment": self.environment,
                    "runtime_seconds": self.runtime_seconds,
                    "rows": self.rows,
                    "aggregates": self.aggregates,
                },
                f,
                indent=2,
                sort_keys=True,
                default=_json_default,
            )
            f.write("\n")
        write_csv(out / "results.csv", self.rows)
        if self.aggregates:
            write_csv(out / "aggregates.csv", self.aggregates)
        return out


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_csv(path, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0].keys())
    for r in rows[1:]:
        for k in r:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _environment() -> dict:
    return {
        "version": _version,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _finish(report: ExperimentReport, started: float) -> ExperimentReport:
    report.environment = _environment()
    report.runtime_seconds = time.time() - started
    return report


def _aggregate(rows, group_keys, value_keys):
    groups: dict[tuple, list] = {}
    for r in rows:
        if r.get("diverged"):
            continue
        groups.setdefault(tuple(r[k] for k in group_keys), []).append(r)
    out = []
    for key in sorted(groups):
        members = groups[key]
        agg = dict(zip(group_keys, key))
        agg["n"] = len(members)
        for vk in value_keys:
            vals = [m[vk] for m in members if m.get(vk) is not None]
            agg[f"{vk}_mean"] = float(np.mean(vals)) if vals else None
            agg[f"{vk}_std"] = float(np.std(vals)) if vals else None
        out.append(agg)
    return out


def _make_dataset(family, codim, seed, n_per_class, delta):
    """Train/test pair for a synthetic family at the requested codimension."""
    if family == "circles":
        return make_circles(codim + 1, n_per_class=n_per_class, seed=seed)
    if family == "planes":
        return make_planes(delta, ambient_dim=codim + 2)
    raise GeometryError(f"unknown dataset family {family!r}")


def _train_model(
    train_ds: LabeledDataset,
    seed: int,
    optimizer: str,
    epochs: int,
    training: str,
    adv_eps: float,
    adv_norm: NormKind,
    hidden: int = 100,
):
    adversary = None
    if training == "adversarial":
        adversary = PgdConfig(eps=adv_eps, norm=adv_norm, random_start=True)
    elif training != "natural":
        raise GeometryError(f"unknown training mode {training!r}")
    cfg = TrainConfig(optimizer=optimizer, epochs=epochs, seed=seed, adversary=adversary)
    d = train_ds.spec.ambient_dim
    model = MlpModel.init([d, hidden, 2], seed=seed)
    return train(model, train_ds.points, train_ds.labels - 1, cfg)


def _attack_fn(name):
    if name == "fgsm":
        return lambda model, x, y, eps, norm: fgsm(model, x, y, eps, norm)
    if name == "bim":
        return lambda model, x, y, eps, norm: bim(model, x, y, eps, norm)
    raise GeometryError(f"unknown attack {name!r} for sweeps (use fgsm or bim)")


def run_codim_sweep(
    family: str = "circles",
    codims=(1, 10, 100, 500),
    eps_grid=(0.25, 0.5, 0.75, 1.0),
    attack: str = "fgsm",
    training: str = "natural",
    optimizer: str = "adam",
    n_retrain: int = 20,
    base_seed: int = 0,
    delta: float = 1.0,
    n_per_class: int = 1000,
    epochs: int = 250,
    adv_eps: float = 1.0,
    attack_norm: NormKind = NormKind.L2,
) -> ExperimentReport:
    """Robustness vs codimension: train, attack on an eps grid, and score a
    nearest-neighbor classifier on the same adversarial examples."""
    started = time.time()
    attack_run = _attack_fn(attack)
    rows = []
    diverged = 0
    for codim in codims:
        for i in range(n_retrain):
            seed = _derive_seed(base_seed, codim, i)
            train_ds, test_ds = _make_dataset(family, codim, seed, n_per_class, delta)
            try:
                model, _ = _train_model(
                    train_ds, seed, optimizer, epochs, training, adv_eps, attack_norm
                )
            except TrainingDivergedError as err:
                diverged += 1
                rows.append(
                    {"codim": codim, "seed": seed, "eps": None, "diverged": True,
                     "diverged_epoch": err.epoch}
                )
                continue
            y_test = test_ds.labels - 1
            clean_acc = float(np.mean(model.predict(test_ds.points) == y_test))
            nn_index = NnIndex(train_ds.points, train_ds.labels)
            for eps in eps_grid:
                out = attack_run(model, test_ds.points, y_test, eps, attack_norm)
                nn_labels, _ = classify_batch(nn_index, out.adversarial_points)
                rows.append(
                    {
                        "codim": codim,
                        "seed": seed,
                        "eps": eps,
                        "clean_acc": clean_acc,
                        "model_robust_acc": 1.0 - out.success_rate,
                        "nn_robust_acc": float(np.mean(nn_labels == test_ds.labels)),
                    }
                )
    aggregates = _aggregate(
        rows, ["codim", "eps"], ["model_robust_acc", "nn_robust_acc", "clean_acc"]
    )
    config = {
        "family": family, "codims": list(codims), "eps_grid": list(eps_grid),
        "attack": attack, "training": training, "optimizer": optimizer,
        "n_retrain": n_retrain, "base_seed": base_seed, "delta": delta,
        "n_per_class": n_per_class, "epochs": epochs, "adv_eps": adv_eps,
        "attack_norm": attack_norm.value, "diverged_count": diverged,
    }
    return _finish(
        ExperimentReport("codim_sweep", config, rows, aggregates), started
    )


def run_tradeoff(
    d_grid=(1, 2, 4, 9, 16),
    r1: float = 1.0,
    r2: float = 3.0,
    n_retrain: int = 3,
    base_seed: int = 0,
    n_per_class: int = 500,
    epochs: int = 100,
    eps2_grid=None,
    train_eps_fraction: float = 0.9,
) -> ExperimentReport:
    """Norm tradeoff: train an L-inf-robust model per sphere dimension and
    measure where L2 attacks start succeeding, against the analytic offset."""
    started = time.time()
    if eps2_grid is None:
        eps2_grid = [round(v, 4) for v in np.linspace(0.05, 1.0, 20)]
    rows = []
    aggregates = []
    for d in d_grid:
        offset = linf_axis_offset(r1, r2, d)
        eps_stars = []
        for i in range(n_retrain):
            seed = _derive_seed(base_seed, d, i)
            train_ds, test_ds = make_spheres(
                d + 1, sphere_dim=d, n_per_class=n_per_class, r1=r1, r2=r2, seed=seed
            )
            adversary = PgdConfig(
                eps=train_eps_fraction * offset, norm=NormKind.LINF, random_start=True
            )
            cfg = TrainConfig(optimizer="adam", epochs=epochs, seed=seed, adversary=adversary)
            model = MlpModel.init([d + 1, 100, 2], seed=seed)
            model, _ = train(model, train_ds.points, train_ds.labels - 1, cfg)
            y_test = test_ds.labels - 1
            eps_star = None
            for eps in eps2_grid:
                out = bim(model, test_ds.points, y_test, eps, NormKind.L2)
                rows.append(
                    {
                        "sphere_dim": d, "seed": seed, "eps": eps,
                        "analytic_offset": offset,
                        "model_robust_acc": 1.0 - out.success_rate,
                        "attack_success_rate": out.success_rate,
                    }
                )
                if eps_star is None and out.success_rate > 0.5:
                    eps_star = eps
            eps_stars.append(eps_star)
        found = [e for e in eps_stars if e is not None]
        aggregates.append(
            {
                "sphere_dim": d,
                "analytic_offset": offset,
                "n": len(eps_stars),
                "eps2_star_mean": float(np.mean(found)) if found else None,
                "eps2_star_found": len(found),
            }
        )
    config = {
        "d_grid": list(d_grid), "r1": r1, "r2": r2, "n_retrain": n_retrain,
        "base_seed": base_seed, "n_per_class": n_per_class, "epochs": epochs,
        "eps2_grid": list(eps2_grid), "train_eps_fraction": train_eps_fraction,
    }
    return _finish(ExperimentReport("tradeoff", config, rows, aggregates), started)


def perturbation_angles(
    perturbations: np.ndarray, base_points: np.ndarray, spec: ManifoldSpec
) -> np.ndarray:
    """Vectorized angles (degrees) between perturbations and the normal space.

    Zero perturbations are skipped (returned as NaN).
    """
    fam = spec.family
    eta = np.asarray(perturbations, dtype=np.float64)
    base = np.asarray(base_points, dtype=np.float64)
    norms = np.linalg.norm(eta, axis=1)
    if isinstance(fam, ConcentricSpheres):
        m = fam.sphere_dim + 1
        sub = base[:, :m]
        radial = sub / np.linalg.norm(sub, axis=1, keepdims=True)
        radial_comp = np.sum(eta[:, :m] * radial, axis=1)
        pad_sq = np.sum(eta[:, m:] ** 2, axis=1)
        proj = np.sqrt(radial_comp**2 + pad_sq)
    else:
        proj = np.linalg.norm(eta[:, fam.flat_dim :], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.clip(proj / norms, 0.0, 1.0)
        out = np.degrees(np.arccos(cos))
    out[norms == 0] = np.nan
    return out


ANGLE_BIN_EDGES = [float(v) for v in np.arange(0.0, 91.0, 5.0)]


def run_angle_histogram(
    codims=(1, 10, 100, 500),
    n_retrain: int = 20,
    base_seed: int = 0,
    epochs: int = 250,
    optimizer: str = "sgd",
    eps: float = 1.0,
    n_per_class: int = 1000,
) -> ExperimentReport:
    """Histogram of angles between FGSM perturbations and the normal space."""
    started = time.time()
    rows = []
    bin_rows = []
    for codim in codims:
        bin_acc = np.zeros(len(ANGLE_BIN_EDGES) - 1)
        for i in range(n_retrain):
            seed = _derive_seed(base_seed, codim, i)
            train_ds, test_ds = make_circles(codim + 1, n_per_class=n_per_class, seed=seed)
            model, _ = _train_model(
                train_ds, seed, optimizer, epochs, "natural", 0.0, NormKind.L2
            )
            out = fgsm(model, test_ds.points, test_ds.labels - 1, eps, NormKind.L2)
            angles = perturbation_angles(out.perturbations, test_ds.points, train_ds.spec)
            angles = angles[np.isfinite(angles)]
            hist, _ = np.histogram(angles, bins=ANGLE_BIN_EDGES)
            frac = hist / max(len(angles), 1)
            bin_acc += frac
            rows.append(
                {
                    "codim": codim, "seed": seed, "n_angles": int(len(angles)),
                    "frac_below_10": float(np.mean(angles < 10.0)),
                    "frac_below_20": float(np.mean(angles < 20.0)),
                    "median_angle": float(np.median(angles)),
                }
            )
        bin_mean = bin_acc / n_retrain
        for lo, hi, f in zip(ANGLE_BIN_EDGES[:-1], ANGLE_BIN_EDGES[1:], bin_mean):
            bin_rows.append(
                {"codim": codim, "bin_lo": lo, "bin_hi": hi, "fraction": float(f)}
            )
    aggregates = _aggregate(
        rows, ["codim"], ["frac_below_10", "frac_below_20", "median_angle"]
    )
    config = {
        "codims": list(codims), "n_retrain": n_retrain, "base_seed": base_seed,
        "epochs": epochs, "optimizer": optimizer, "eps": eps, "n_per_class": n_per_class,
        "bin_edges": ANGLE_BIN_EDGES,
    }
    report = _finish(
        ExperimentReport("angle_histogram", config, rows, aggregates), started
    )
    report.config["bin_rows"] = bin_rows
    return report


def planes_2d_spec() -> ManifoldSpec:
    """The two-line version of the planes dataset in the plane (x in [-10,10], y in {0,2})."""
    return planes_spec(2, flat_dim=1, lo=-10.0, hi=10.0)


def run_gradfield(
    model: MlpModel,
    grid_res: int = 50,
    x_range=(-10.0, 10.0),
    y_range=(-1.0, 3.0),
) -> ExperimentReport:
    """Loss-gradient field of a model over a 2-d grid around the line dataset.

    Rows are (x, y, gx, gy, magnitude); the loss label at each grid point is
    the nearest line's class.
    """
    started = time.time()
    if model.input_dim != 2:
        raise GeometryError("gradient field export expects a 2-d input model")
    xs = np.linspace(x_range[0], x_range[1], grid_res)
    ys = np.linspace(y_range[0], y_range[1], grid_res)
    gx_grid, gy_grid = np.meshgrid(xs, ys, indexing="xy")
    pts = np.stack([gx_grid.ravel(), gy_grid.ravel()], axis=1)
    labels = (pts[:, 1] > 1.0).astype(np.int64)  # nearest line: y=0 -> 0, y=2 -> 1
    grads = input_gradients(model, pts, labels)
    mags = np.linalg.norm(grads, axis=1)
    rows = [
        {
            "x": float(p[0]), "y": float(p[1]),
            "gx": float(g[0]), "gy": float(g[1]), "magnitude": float(m),
        }
        for p, g, m in zip(pts, grads, mags)
    ]
    on_manifold = (np.abs(pts[:, 1]) < 0.15) | (np.abs(pts[:, 1] - 2.0) < 0.15)
    near_axis = np.abs(pts[:, 1] - 1.0) < 0.15
    config = {
        "grid_res": grid_res, "x_range": list(x_range), "y_range": list(y_range),
        "median_magnitude_on_manifolds": float(np.median(mags[on_manifold])),
        "median_magnitude_near_axis": float(np.median(mags[near_axis])),
    }
    return _finish(ExperimentReport("gradfield", config, rows), started)


def run_boundary_slices(
    predict_fns: list,
    z_values=(-2.0, -1.0, 0.0, 1.0, 2.0),
    grid_res: int = 101,
    xy_range=(-4.0, 4.0),
    input_dim: int = 3,
) -> ExperimentReport:
    """Cross-sections of a 3-d decision boundary at fixed heights.

    ``predict_fns`` map an (n, input_dim) array to labels in {1, 2}; passing
    several (one per retraining) yields per-cell class-2 frequencies in [0,1].
    """
    started = time.time()
    if input_dim < 3:
        raise GeometryError("slices need at least 3 input dimensions")
    axis = np.linspace(xy_range[0], xy_range[1], grid_res)
    xg, yg = np.meshgrid(axis, axis, indexing="xy")
    rows = []
    for z in z_values:
        pts = np.zeros((grid_res * grid_res, input_dim))
        pts[:, 0] = xg.ravel()
        pts[:, 1] = yg.ravel()
        pts[:, 2] = z
        freq = np.zeros(len(pts))
        for fn in predict_fns:
            freq += np.asarray(fn(pts)) == 2
        freq /= len(predict_fns)
        rows.extend(
            {"z": float(z), "x": float(p[0]), "y": float(p[1]), "class2_freq": float(f)}
            for p, f in zip(pts, freq)
        )
    config = {
        "z_values": [float(z) for z in z_values], "grid_res": grid_res,
        "xy_range": list(xy_range), "n_models": len(predict_fns),
    }
    return _finish(ExperimentReport("boundary_slices", config, rows), started)


def run_mnist_nn(
    mnist_dir,
    eps_grid=(0.1, 0.2, 0.3, 0.4, 0.5),
    epochs_natural: int = 20,
    epochs_adversarial: int = 5,
    adv_train_eps: float = 0.3,
    attack_subset: int = 1000,
    walk_subset: int = 100,
    train_subsample: int | None = None,
    base_seed: int = 0,
    pgm_dir=None,
    pgm_count: int = 4,
) -> ExperimentReport:
    """MNIST stand-in study: BIM attacks on natural/adversarial MLPs scored by
    a raw-pixel nearest-neighbor classifier, plus a neighbor-walk attack on
    the nearest-neighbor classifier scored by the adversarial model.

    The MLPs are desk-scale substitutions (784-100-10, Adam at lr=1e-3,
    minibatch 128); training lengths and the PGD budget are reduced
    accordingly and echoed in the config.
    """
    started = time.time()
    sets = load_mnist(mnist_dir)
    train_images, train_labels = sets["train"].images, sets["train"].labels
    test_images, test_labels = sets["test"].images, sets["test"].labels
    rng = np.random.default_rng([base_seed, 0xD1617])
    if train_subsample is not None and train_subsample < len(train_images):
        sel = rng.choice(len(train_images), size=train_subsample, replace=False)
        train_images, train_labels = train_images[sel], train_labels[sel]

    natural_cfg = TrainConfig(
        optimizer="adam", lr=1e-3, epochs=epochs_natural, batch_size=128,
        seed=_derive_seed(base_seed, 1),
    )
    model_nat = MlpModel.init([784, 100, 10], seed=natural_cfg.seed)
    model_nat, _ = train(model_nat, train_images, train_labels, natural_cfg)

    adv_cfg = TrainConfig(
        optimizer="adam", lr=1e-3, epochs=epochs_adversarial, batch_size=128,
        seed=_derive_seed(base_seed, 2),
        adversary=PgdConfig(eps=adv_train_eps, step=0.05, iters=10,
                            norm=NormKind.LINF, random_start=True),
    )
    model_adv = MlpModel.init([784, 100, 10], seed=adv_cfg.seed)
    model_adv, _ = train(model_adv, train_images, train_labels, adv_cfg)

    nn_index = NnIndex(train_images, train_labels)

    clean_nat = float(np.mean(model_nat.predict(test_images) == test_labels))
    clean_adv = float(np.mean(model_adv.predict(test_images) == test_labels))
    nn_pred, _ = classify_batch(nn_index, test_images)
    clean_nn = float(np.mean(nn_pred == test_labels))

    sel = rng.choice(len(test_images), size=min(attack_subset, len(test_images)), replace=False)
    atk_x, atk_y = test_images[sel], test_labels[sel]
    rows = []
    for eps in eps_grid:
        for name, target in (("bim_vs_natural", model_nat), ("bim_vs_adversarial", model_adv)):
            out = bim(target, atk_x, atk_y, eps, NormKind.LINF, clip=(0.0, 1.0))
            nn_labels, _ = classify_batch(nn_index, out.adversarial_points)
            rows.append(
                {
                    "attack": name, "eps": eps, "n": len(atk_x),
                    "acc_natural": float(np.mean(model_nat.predict(out.adversarial_points) == atk_y)),
                    "acc_adversarial": float(np.mean(model_adv.predict(out.adversarial_points) == atk_y)),
                    "acc_nn": float(np.mean(nn_labels == atk_y)),
                }
            )

    walk_sel = rng.choice(len(test_images), size=min(walk_subset, len(test_images)), replace=False)
    walk_examples = {}
    for eps in eps_grid:
        adv_pts = np.empty((len(walk_sel), 784))
        for j, t in enumerate(walk_sel):
            adv_pts[j], _ = nn_walk_attack(
                nn_index, test_images[t], int(test_labels[t]), eps=eps,
                iters=50, k=10, norm=NormKind.LINF, clip=(0.0, 1.0),
            )
        nn_labels, _ = classify_batch(nn_index, adv_pts)
        wy = test_labels[walk_sel]
        rows.append(
            {
                "attack": "nn_walk", "eps": eps, "n": len(walk_sel),
                "acc_natural": float(np.mean(model_nat.predict(adv_pts) == wy)),
                "acc_adversarial": float(np.mean(model_adv.predict(adv_pts) == wy)),
                "acc_nn": float(np.mean(nn_labels == wy)),
            }
        )
        walk_examples[eps] = adv_pts

    if pgm_dir is not None:
        pgm_path = Path(pgm_dir)
        pgm_path.mkdir(parents=True, exist_ok=True)
        big = max(eps_grid)
        bim_out = bim(model_nat, atk_x[:pgm_count], atk_y[:pgm_count], big,
                      NormKind.LINF, clip=(0.0, 1.0))
        for j in range(min(pgm_count, len(atk_x))):
            save_pgm(atk_x[j], pgm_path / f"original_{j}_label{atk_y[j]}.pgm")
            save_pgm(bim_out.adversarial_points[j], pgm_path / f"bim_natural_{j}.pgm")
            if len(walk_sel) > j:
                save_pgm(walk_examples[big][j], pgm_path / f"nn_walk_{j}.pgm")

    config = {
        "eps_grid": list(eps_grid), "epochs_natural": epochs_natural,
        "epochs_adversarial": epochs_adversarial, "adv_train_eps": adv_train_eps,
        "attack_subset": int(len(atk_x)), "walk_subset": int(len(walk_sel)),
        "train_subsample": train_subsample, "base_seed": base_seed,
        "train_size": int(len(train_images)),
        "clean_acc_natural": clean_nat, "clean_acc_adversarial": clean_adv,
        "clean_acc_nn": clean_nn,
        "natural_config_hash": natural_cfg.config_hash(),
        "adversarial_config_hash": adv_cfg.config_hash(),
    }
    return _finish(ExperimentReport("mnist_nn", config, rows), started)
