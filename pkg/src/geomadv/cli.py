"""Command-line harness for data generation, training, attacks, certification,
bound sweeps, and the experiment pipelines.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 ordering-assertion
failure (only with --assert).  All CSV output is UTF-8 with LF newlines and a
header row.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from .attacks import bim, fgsm, gradient_free_projection, pgd
from .covers import grid_cover_flats, verify_cover
from .data import load_dataset, make_circles, make_planes, save_dataset
from .experiments import (
    planes_2d_spec,
    run_angle_histogram,
    run_boundary_slices,
    run_codim_sweep,
    run_gradfield,
    run_mnist_nn,
    run_tradeoff,
    write_csv,
)
from .geometry import NormKind
from .mlp import (
    MlpModel,
    PgdConfig,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .nearest import NnIndex, certify, classify_batch
from .svgplot import heatmap_plot, histogram_plot, line_plot

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_ASSERT = 3


class UsageError(Exception):
    pass


class OrderingAssertionError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _norm(arg: str) -> NormKind:
    try:
        return {"l2": NormKind.L2, "linf": NormKind.LINF}[arg.lower()]
    except KeyError:
        raise UsageError(f"unknown norm {arg!r} (use l2 or linf)")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> _Parser:
    p = _Parser(prog="geomadv", description=__doc__)
    p._command_parsers = {}
    p.add_argument("--seed", type=int, default=0, help="base seed for all randomness")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--config", default=None, help="JSON file with defaults for the subcommand")
    p.add_argument("--assert", dest="assert_mode", action="store_true",
                   help="enable qualitative ordering checks (exit 3 on failure)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset as CSV + JSON sidecar")
    g.add_argument("--family", choices=["circles", "planes"])
    g.add_argument("--ambient-dim", type=int)
    g.add_argument("--n-per-class", type=int, default=1000)
    g.add_argument("--delta", type=float, default=1.0)
    g.add_argument("--rotate", action="store_true")

    c = sub.add_parser("cover", help="verify the cover radius of a dataset")
    c.add_argument("--dataset", help="dataset base path (without extension)")
    c.add_argument("--delta", type=float)
    c.add_argument("--norm", default="l2")
    c.add_argument("--n-probe", type=int, default=10_000)

    b = sub.add_parser("bounds", help="emit a CSV of a bound formula over a dimension sweep")
    b.add_argument("--formula",
                   choices=["coverage_ratio", "plane_coverage", "tube_cover_samples",
                            "sphere_coverage", "linear_regions", "segment_count",
                            "linf_axis_offset", "sampling_gap_ratio"])
    b.add_argument("--d-grid", default="3:500:40",
                   help="dimension sweep start:stop:count (inclusive, integer)")
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--eps", type=float, default=1.0)
    b.add_argument("--vol-k", type=float, default=400.0)
    b.add_argument("--n-samples", type=int, default=450)
    b.add_argument("--lo", type=float, default=-10.0)
    b.add_argument("--hi", type=float, default=10.0)
    b.add_argument("--r1", type=float, default=1.0)
    b.add_argument("--r2", type=float, default=3.0)
    b.add_argument("--rch", type=float, default=1.0)
    b.add_argument("--tau", type=float, default=0.25)

    t = sub.add_parser("train", help="train an MLP on a dataset CSV and save a checkpoint")
    t.add_argument("--dataset")
    t.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    t.add_argument("--epochs", type=int, default=250)
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--hidden", type=int, default=100)
    t.add_argument("--adv-eps", type=float, default=None,
                   help="enable PGD adversarial training at this radius")
    t.add_argument("--adv-norm", default="l2")
    t.add_argument("--adv-iters", type=int, default=30)
    t.add_argument("--adv-step", type=float, default=0.05)

    a = sub.add_parser("attack", help="attack a checkpointed model over an eps grid")
    a.add_argument("--method", choices=["fgsm", "bim", "pgd", "gradient_free"])
    a.add_argument("--model", help="checkpoint path")
    a.add_argument("--dataset")
    a.add_argument("--eps-grid", default="0.25,0.5,0.75,1.0")
    a.add_argument("--norm", default="l2")
    a.add_argument("--step", type=float, default=0.05)
    a.add_argument("--iters", type=int, default=30)

    ce = sub.add_parser("certify", help="nearest-neighbor robustness certificate for a dataset")
    ce.add_argument("--dataset")
    ce.add_argument("--eps", type=float)
    ce.add_argument("--norm", default="l2")
    ce.add_argument("--tau", type=float, default=0.0)
    ce.add_argument("--n-probe", type=int, default=10_000)
    ce.add_argument("--learner", choices=["nn", "ball"], default="nn")

    sc = sub.add_parser("sweep-codim", help="robustness vs codimension experiment")
    sc.add_argument("--family", choices=["circles", "planes"], default="circles")
    sc.add_argument("--codims", default="1,10,100,500")
    sc.add_argument("--eps-grid", default="0.25,0.5,0.75,1.0")
    sc.add_argument("--attack", choices=["fgsm", "bim"], default="fgsm")
    sc.add_argument("--training", choices=["natural", "adversarial"], default="natural")
    sc.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    sc.add_argument("--n-retrain", type=int, default=20)
    sc.add_argument("--epochs", type=int, default=250)
    sc.add_argument("--delta", type=float, default=1.0)
    sc.add_argument("--n-per-class", type=int, default=1000)
    sc.add_argument("--adv-eps", type=float, default=1.0)

    tr = sub.add_parser("tradeoff", help="L-inf robust training vs L2 attack radius experiment")
    tr.add_argument("--d-grid", default="1,2,4,9,16")
    tr.add_argument("--n-retrain", type=int, default=3)
    tr.add_argument("--epochs", type=int, default=100)
    tr.add_argument("--n-per-class", type=int, default=500)

    an = sub.add_parser("angles", help="normal-space angle histogram experiment")
    an.add_argument("--codims", default="1,10,100,500")
    an.add_argument("--n-retrain", type=int, default=20)
    an.add_argument("--epochs", type=int, default=250)
    an.add_argument("--optimizer", choices=["adam", "sgd"], default="sgd")
    an.add_argument("--n-per-class", type=int, default=1000)

    gf = sub.add_parser("gradfield", help="loss-gradient field export for a 2-d model")
    gf.add_argument("--model", default=None, help="checkpoint; trains a fresh one if omitted")
    gf.add_argument("--grid-res", type=int, default=50)
    gf.add_argument("--training", choices=["natural", "adversarial"], default="adversarial")
    gf.add_argument("--epochs", type=int, default=250)
    gf.add_argument("--delta", type=float, default=1.0)

    sl = sub.add_parser("slices", help="decision-boundary cross-sections for circles in R^3")
    sl.add_argument("--classifier", choices=["nn", "mlp"], default="nn")
    sl.add_argument("--z-values", default="-2,-1,0,1,2")
    sl.add_argument("--grid-res", type=int, default=81)
    sl.add_argument("--n-retrain", type=int, default=1)
    sl.add_argument("--epochs", type=int, default=250)
    sl.add_argument("--n-per-class", type=int, default=1000)

    mn = sub.add_parser("mnist-nn", help="MNIST nearest-neighbor robustness experiment")
    mn.add_argument("--mnist-dir")
    mn.add_argument("--eps-grid", default="0.1,0.2,0.3,0.4,0.5")
    mn.add_argument("--epochs-natural", type=int, default=20)
    mn.add_argument("--epochs-adversarial", type=int, default=5)
    mn.add_argument("--attack-subset", type=int, default=1000)
    mn.add_argument("--walk-subset", type=int, default=100)
    mn.add_argument("--train-subsample", type=int, default=None)
    p._command_parsers = {
        "gen-data": g, "cover": c, "bounds": b, "train": t, "attack": a,
        "certify": ce, "sweep-codim": sc, "tradeoff": tr, "angles": an,
        "gradfield": gf, "slices": sl, "mnist-nn": mn,
    }
    return p


def _floats(arg: str) -> list[float]:
    return [float(v) for v in str(arg).split(",") if v != ""]


def _ints(arg: str) -> list[int]:
    return [int(v) for v in str(arg).split(",") if v != ""]


def _d_sweep(arg: str) -> list[int]:
    try:
        start, stop, count = arg.split(":")
        grid = np.unique(np.round(np.linspace(int(start), int(stop), int(count))).astype(int))
        return [int(v) for v in grid]
    except ValueError:
        raise UsageError(f"bad --d-grid {arg!r}, expected start:stop:count")


def cmd_gen_data(args) -> int:
    out = _out_dir(args)
    if args.family == "circles":
        train_ds, test_ds = make_circles(
            args.ambient_dim, n_per_class=args.n_per_class, seed=args.seed, rotate=args.rotate
        )
    else:
        train_ds, test_ds = make_planes(args.delta, ambient_dim=args.ambient_dim)
    save_dataset(train_ds, out / f"{args.family}_train")
    save_dataset(test_ds, out / f"{args.family}_test")
    print(f"wrote {len(train_ds)} train / {len(test_ds)} test points to {out}")
    return EXIT_OK


def cmd_cover(args) -> int:
    ds = load_dataset(args.dataset)
    check = verify_cover(ds, args.delta, _norm(args.norm), n_probe=args.n_probe, seed=args.seed)
    result = {"is_cover": check.is_cover, "worst_gap": check.worst_gap, "n_probe": check.n_probe}
    print(json.dumps(result, indent=2))
    out = _out_dir(args)
    (out / "cover.json").write_text(json.dumps(result, indent=2) + "\n")
    return EXIT_OK


def cmd_bounds(args) -> int:
    rows = []
    for d in _d_sweep(args.d_grid):
        try:
            if args.formula == "coverage_ratio":
                r = bounds_mod.coverage_ratio_bound(args.k, d, args.eps, args.vol_k, args.n_samples)
            elif args.formula == "plane_coverage":
                r = bounds_mod.plane_coverage_bound(args.k, d)
            elif args.formula == "tube_cover_samples":
                r = bounds_mod.tube_cover_sample_lower_bound(args.k, d, args.lo, args.hi)
            elif args.formula == "sphere_coverage":
                r = bounds_mod.sphere_coverage_bound(args.n_samples, d, args.eps)
            elif args.formula == "linear_regions":
                r = bounds_mod.linear_region_lower_bound(args.r1, args.rch, args.tau, d)
            elif args.formula == "segment_count":
                v = bounds_mod.segment_count_lower_bound(args.r1, args.r2, args.eps)
                rows.append({"formula_id": "segment_count", "d": d, "r1": args.r1,
                             "r2": args.r2, "eps": args.eps, "value": v,
                             "log_value": float(np.log(v))})
                continue
            elif args.formula == "linf_axis_offset":
                v = bounds_mod.linf_axis_offset(args.r1, args.r2, d)
                rows.append({"formula_id": "linf_axis_offset", "d": d, "r1": args.r1,
                             "r2": args.r2, "value": v, "log_value": float(np.log(v))})
                continue
            else:
                v = bounds_mod.sampling_gap_ratio(args.k, args.eps)
                rows.append({"formula_id": "sampling_gap_ratio", "d": d, "k": args.k,
                             "eps": args.eps, "value": v, "log_value": float(np.log(v))})
                continue
        except bounds_mod.BoundDomainError as err:
            rows.append({"formula_id": args.formula, "d": d, "error": str(err)})
            continue
        rows.append(r.row() | {"d": d})
    out = _out_dir(args)
    write_csv(out / f"bounds_{args.formula}.csv", rows)
    ok = [r for r in rows if "value" in r and np.isfinite(r["value"])]
    if ok:
        svg = line_plot(
            [r["d"] for r in ok], {args.formula: [r["value"] for r in ok]},
            title=args.formula, xlabel="ambient dimension d", ylabel="bound value",
        )
        (out / f"bounds_{args.formula}.svg").write_text(svg)
    print(f"wrote {len(rows)} rows to {out / f'bounds_{args.formula}.csv'}")
    return EXIT_OK


def cmd_train(args) -> int:
    ds = load_dataset(args.dataset)
    adversary = None
    if args.adv_eps is not None:
        adversary = PgdConfig(eps=args.adv_eps, step=args.adv_step, iters=args.adv_iters,
                              norm=_norm(args.adv_norm), random_start=True)
    cfg = TrainConfig(optimizer=args.optimizer, lr=args.lr, epochs=args.epochs,
                      batch_size=args.batch_size, seed=args.seed, adversary=adversary)
    model = MlpModel.init([ds.spec.ambient_dim, args.hidden, 2], seed=args.seed)
    model, losses = train(model, ds.points, ds.labels - 1, cfg)
    out = _out_dir(args)
    ckpt = out / "model.ckpt"
    save_checkpoint(model, ckpt)
    write_csv(out / "loss_trace.csv",
              [{"epoch": i, "loss": float(v)} for i, v in enumerate(losses)])
    acc = float(np.mean(model.predict(ds.points) == ds.labels - 1))
    print(f"saved {ckpt} (final train accuracy {acc:.4f})")
    return EXIT_OK


def cmd_attack(args) -> int:
    model = load_checkpoint(args.model)
    ds = load_dataset(args.dataset)
    labels = ds.labels - 1
    norm = _norm(args.norm)
    rows = []
    summary = []
    for eps in _floats(args.eps_grid):
        if args.method == "fgsm":
            out = fgsm(model, ds.points, labels, eps, norm)
        elif args.method == "bim":
            out = bim(model, ds.points, labels, eps, norm, step=args.step, iters=args.iters)
        elif args.method == "pgd":
            cfg = PgdConfig(eps=eps, step=args.step, iters=args.iters, norm=norm)
            out = pgd(model, ds.points, labels, cfg, seed=args.seed)
        else:
            out = gradient_free_projection(model.predict, ds.points, labels, eps, norm)
        for i in range(len(ds.points)):
            rows.append({"row": i, "eps": eps, "success": bool(out.success_mask[i]),
                         "perturbation_norm": float(out.perturbation_norms[i])})
        summary.append({"eps": eps, "success_rate": out.success_rate,
                        "robust_accuracy": 1.0 - out.success_rate})
    out_dir = _out_dir(args)
    write_csv(out_dir / "attack_rows.csv", rows)
    (out_dir / "attack_summary.json").write_text(
        json.dumps({"method": args.method, "norm": args.norm, "results": summary}, indent=2)
        + "\n"
    )
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_certify(args) -> int:
    ds = load_dataset(args.dataset)
    index = NnIndex(ds.points, ds.labels, norm=_norm(args.norm))
    cert = certify(index, ds.spec, args.eps, _norm(args.norm), tau=args.tau,
                   n_probe=args.n_probe, seed=args.seed, learner=args.learner)
    payload = {
        "eps": cert.eps, "delta_measured": cert.delta_measured, "rch": cert.rch,
        "condition": cert.condition, "bound": cert.bound(), "holds": cert.holds,
        "tau": cert.tau, "probe_errors": cert.probe_errors, "n_probe": cert.n_probe,
    }
    print(json.dumps(payload, indent=2))
    out = _out_dir(args)
    (out / "certificate.json").write_text(json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def _sweep_plot(report, out: Path) -> None:
    eps_grid = sorted({r["eps"] for r in report.aggregates})
    codims = sorted({r["codim"] for r in report.aggregates})
    for metric, fname in (("model_robust_acc_mean", "model_robustness.svg"),
                          ("nn_robust_acc_mean", "nn_robustness.svg")):
        series = {}
        for c in codims:
            series[f"codim {c}"] = [
                next(r[metric] for r in report.aggregates if r["codim"] == c and r["eps"] == e)
                for e in eps_grid
            ]
        svg = line_plot(eps_grid, series, title=metric.replace("_mean", ""),
                        xlabel="attack radius", ylabel="accuracy", y_range=(0.0, 1.05))
        (out / fname).write_text(svg)


def cmd_sweep_codim(args) -> int:
    report = run_codim_sweep(
        family=args.family, codims=_ints(args.codims), eps_grid=_floats(args.eps_grid),
        attack=args.attack, training=args.training, optimizer=args.optimizer,
        n_retrain=args.n_retrain, base_seed=args.seed, delta=args.delta,
        n_per_class=args.n_per_class, epochs=args.epochs, adv_eps=args.adv_eps,
    )
    out = _out_dir(args)
    report.save(out)
    _sweep_plot(report, out)
    print(f"codim sweep saved to {out} ({len(report.rows)} rows)")
    if args.assert_mode:
        codims = sorted({r["codim"] for r in report.aggregates})
        top_eps = max(r["eps"] for r in report.aggregates)
        lo = next(r["model_robust_acc_mean"] for r in report.aggregates
                  if r["codim"] == codims[0] and r["eps"] == top_eps)
        hi = next(r["model_robust_acc_mean"] for r in report.aggregates
                  if r["codim"] == codims[-1] and r["eps"] == top_eps)
        if hi > lo:
            raise OrderingAssertionError(
                f"robust accuracy did not decrease with codimension ({lo:.3f} -> {hi:.3f})"
            )
        bad_nn = [r for r in report.aggregates
                  if r["eps"] <= 0.99 and r["nn_robust_acc_mean"] < 0.99]
        if bad_nn:
            raise OrderingAssertionError(
                f"nearest neighbor fell below 0.99 at {len(bad_nn)} grid cells"
            )
    return EXIT_OK


def cmd_tradeoff(args) -> int:
    report = run_tradeoff(d_grid=_ints(args.d_grid), n_retrain=args.n_retrain,
                          base_seed=args.seed, epochs=args.epochs,
                          n_per_class=args.n_per_class)
    out = _out_dir(args)
    report.save(out)
    dims = [r["sphere_dim"] for r in report.aggregates]
    svg = line_plot(
        dims,
        {
            "analytic offset": [r["analytic_offset"] for r in report.aggregates],
            "empirical eps2*": [r["eps2_star_mean"] for r in report.aggregates],
        },
        title="norm tradeoff", xlabel="sphere dimension", ylabel="L2 radius",
    )
    (out / "tradeoff.svg").write_text(svg)
    print(f"tradeoff saved to {out}")
    if args.assert_mode:
        stars = [r["eps2_star_mean"] for r in report.aggregates]
        found = [s for s in stars if s is not None]
        if len(found) >= 2 and found[-1] > found[0]:
            raise OrderingAssertionError(
                f"empirical eps2* did not decrease with dimension: {stars}"
            )
    return EXIT_OK


def cmd_angles(args) -> int:
    report = run_angle_histogram(codims=_ints(args.codims), n_retrain=args.n_retrain,
                                 base_seed=args.seed, epochs=args.epochs,
                                 optimizer=args.optimizer, n_per_class=args.n_per_class)
    out = _out_dir(args)
    report.save(out)
    bin_rows = report.config.pop("bin_rows")
    write_csv(out / "histogram_bins.csv", bin_rows)
    for codim in sorted({r["codim"] for r in bin_rows}):
        rows = [r for r in bin_rows if r["codim"] == codim]
        edges = [r["bin_lo"] for r in rows] + [rows[-1]["bin_hi"]]
        svg = histogram_plot(edges, [r["fraction"] for r in rows],
                             title=f"angle to normal space, codim {codim}",
                             xlabel="angle (degrees)")
        (out / f"angles_codim{codim}.svg").write_text(svg)
    print(f"angle histograms saved to {out}")
    if args.assert_mode:
        for agg in report.aggregates:
            if agg["codim"] >= 10 and agg["frac_below_20_mean"] < 0.8:
                raise OrderingAssertionError(
                    f"codim {agg['codim']}: only {agg['frac_below_20_mean']:.2f} of "
                    "perturbations within 20 degrees of the normal space"
                )
    return EXIT_OK


def cmd_gradfield(args) -> int:
    if args.model:
        model = load_checkpoint(args.model)
    else:
        spec = planes_2d_spec()
        train_ds = grid_cover_flats(spec, args.delta)
        adversary = None
        if args.training == "adversarial":
            adversary = PgdConfig(eps=1.0, norm=NormKind.L2, random_start=True)
        cfg = TrainConfig(optimizer="adam", epochs=args.epochs, seed=args.seed,
                          adversary=adversary)
        model = MlpModel.init([2, 100, 2], seed=args.seed)
        model, _ = train(model, train_ds.points, train_ds.labels - 1, cfg)
    report = run_gradfield(model, grid_res=args.grid_res)
    out = _out_dir(args)
    report.save(out)
    res = args.grid_res
    mags = np.array([r["magnitude"] for r in report.rows]).reshape(res, res)
    svg = heatmap_plot(mags, (-10.0, 10.0, -1.0, 3.0), title="loss gradient magnitude",
                       xlabel="x", ylabel="y")
    (out / "gradfield.svg").write_text(svg)
    ratio = (report.config["median_magnitude_on_manifolds"]
             / max(report.config["median_magnitude_near_axis"], 1e-300))
    print(f"gradient field saved to {out} (manifold/axis magnitude ratio {ratio:.3g})")
    return EXIT_OK


def cmd_slices(args) -> int:
    train_ds, _ = make_circles(3, n_per_class=args.n_per_class, seed=args.seed)
    predict_fns = []
    if args.classifier == "nn":
        index = NnIndex(train_ds.points, train_ds.labels)
        predict_fns.append(lambda pts: classify_batch(index, pts)[0])
    else:
        for i in range(args.n_retrain):
            seed = args.seed + i
            cfg = TrainConfig(optimizer="adam", epochs=args.epochs, seed=seed)
            model = MlpModel.init([3, 100, 2], seed=seed)
            model, _ = train(model, train_ds.points, train_ds.labels - 1, cfg)
            predict_fns.append(lambda pts, m=model: m.predict(pts) + 1)
    report = run_boundary_slices(predict_fns, z_values=_floats(args.z_values),
                                 grid_res=args.grid_res)
    out = _out_dir(args)
    report.save(out)
    res = args.grid_res
    for z in report.config["z_values"]:
        rows = [r for r in report.rows if r["z"] == z]
        grid = np.array([r["class2_freq"] for r in rows]).reshape(res, res)
        svg = heatmap_plot(grid, (-4.0, 4.0, -4.0, 4.0),
                           title=f"class-2 frequency at z={z}", xlabel="x", ylabel="y")
        (out / f"slice_z{z}.svg").write_text(svg)
    print(f"boundary slices saved to {out}")
    return EXIT_OK


def cmd_mnist_nn(args) -> int:
    out = _out_dir(args)
    report = run_mnist_nn(
        args.mnist_dir, eps_grid=_floats(args.eps_grid),
        epochs_natural=args.epochs_natural, epochs_adversarial=args.epochs_adversarial,
        attack_subset=args.attack_subset, walk_subset=args.walk_subset,
        train_subsample=args.train_subsample, base_seed=args.seed,
        pgm_dir=out / "images",
    )
    report.save(out)
    eps = sorted({r["eps"] for r in report.rows})
    series = {
        "NN on bim-vs-natural": [
            next(r["acc_nn"] for r in report.rows
                 if r["attack"] == "bim_vs_natural" and r["eps"] == e) for e in eps
        ],
        "natural model": [
            next(r["acc_natural"] for r in report.rows
                 if r["attack"] == "bim_vs_natural" and r["eps"] == e) for e in eps
        ],
    }
    (out / "mnist_bim.svg").write_text(
        line_plot(eps, series, title="BIM vs natural model", xlabel="eps (L-inf)",
                  ylabel="accuracy", y_range=(0.0, 1.05))
    )
    print(f"mnist experiment saved to {out}")
    print(json.dumps({"clean_acc_nn": report.config["clean_acc_nn"],
                      "clean_acc_natural": report.config["clean_acc_natural"],
                      "clean_acc_adversarial": report.config["clean_acc_adversarial"]},
                     indent=2))
    if args.assert_mode:
        for e in eps:
            row = next(r for r in report.rows
                       if r["attack"] == "bim_vs_natural" and r["eps"] == e)
            if row["acc_nn"] <= row["acc_natural"]:
                raise OrderingAssertionError(
                    f"NN did not beat the natural model under BIM at eps={e}"
                )
    return EXIT_OK


REQUIRED = {
    "gen-data": ("family", "ambient_dim"),
    "cover": ("dataset", "delta"),
    "bounds": ("formula",),
    "train": ("dataset",),
    "attack": ("method", "model", "dataset"),
    "certify": ("dataset", "eps"),
    "mnist-nn": ("mnist_dir",),
}

COMMANDS = {
    "gen-data": cmd_gen_data,
    "cover": cmd_cover,
    "bounds": cmd_bounds,
    "train": cmd_train,
    "attack": cmd_attack,
    "certify": cmd_certify,
    "sweep-codim": cmd_sweep_codim,
    "tradeoff": cmd_tradeoff,
    "angles": cmd_angles,
    "gradfield": cmd_gradfield,
    "slices": cmd_slices,
    "mnist-nn": cmd_mnist_nn,
}


def _config_overrides(argv) -> dict | None:
    for i, token in enumerate(argv):
        if token == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config needs a file path")
            path = argv[i + 1]
            break
        if token.startswith("--config="):
            path = token.split("=", 1)[1]
            break
    else:
        return None
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as err:
        raise UsageError(f"cannot read config file: {err}")
    except json.JSONDecodeError as err:
        raise UsageError(f"config file is not valid JSON: {err}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        overrides = _config_overrides(argv)
        if overrides:
            parser.set_defaults(**overrides)
            for sub in parser._command_parsers.values():
                dests = {action.dest for action in sub._actions}
                fit = {k: v for k, v in overrides.items() if k in dests}
                if fit:
                    sub.set_defaults(**fit)
        args = parser.parse_args(argv)
        missing = [name for name in REQUIRED.get(args.command, ())
                   if getattr(args, name, None) is None]
        if missing:
            flags = ", ".join("--" + m.replace("_", "-") for m in missing)
            raise UsageError(f"{args.command} requires {flags} (flag or config file)")
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OrderingAssertionError as err:
        print(f"ordering assertion failed: {err}", file=sys.stderr)
        return EXIT_ASSERT
    except Exception as err:  # noqa: BLE001 - CLI boundary maps everything to exit 2
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
