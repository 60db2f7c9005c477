"""Dataset materialization and serialization.

Synthetic circle/plane datasets with codimension control, optional seeded
orthogonal rotation of the ambient space, CSV + JSON-sidecar persistence,
and an MNIST IDX reader.  MNIST files are supplied by the user via a
directory path; nothing here touches the network.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .covers import (
    CoverConfig,
    CoverScheme,
    LabeledDataset,
    grid_cell_centers_flats,
    grid_cover_flats,
    random_sample_circles,
)
from .geometry import (
    ConcentricSpheres,
    GeometryError,
    ManifoldSpec,
    ParallelFlats,
)

MNIST_IMAGE_MAGIC = 2051
MNIST_LABEL_MAGIC = 2049

MNIST_FILES = {
    ("train", "images"): "train-images-idx3-ubyte",
    ("train", "labels"): "train-labels-idx1-ubyte",
    ("test", "images"): "t10k-images-idx3-ubyte",
    ("test", "labels"): "t10k-labels-idx1-ubyte",
}


class DataFormatError(ValueError):
    """Malformed dataset file (bad magic, truncation, count mismatch)."""


@dataclass(frozen=True)
class CodimEmbedding:
    """Re-embed a dataset into a higher ambient dimension, optionally rotated."""

    target_ambient_dim: int
    rotate: bool = False
    seed: int = 0

    def apply(self, ds: LabeledDataset) -> LabeledDataset:
        return embed_dataset(ds, self.target_ambient_dim, rotate=self.rotate, seed=self.seed)


def random_rotation(dim: int, seed: int) -> np.ndarray:
    """Orthogonal matrix from QR on a seeded Gaussian, sign-fixed for determinism."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))


def embed_dataset(
    ds: LabeledDataset, target_dim: int, rotate: bool = False, seed: int = 0
) -> LabeledDataset:
    """Zero-pad into ``target_dim`` ambient coordinates, then optionally rotate.

    Circles pad on the right; flats keep their separation axis last, so the
    padding is inserted just before it.  Pairwise L2 distances are preserved
    exactly by padding and to rounding by rotation.
    """
    if ds.rotation is not None:
        raise GeometryError("embed the canonical dataset before applying any rotation")
    spec = ds.spec
    if target_dim < spec.ambient_dim:
        raise GeometryError(
            f"target dim {target_dim} below current ambient dim {spec.ambient_dim}"
        )
    n, d = ds.points.shape
    pts = np.zeros((n, target_dim))
    if isinstance(spec.family, ConcentricSpheres):
        pts[:, :d] = ds.points
    else:
        pts[:, : d - 1] = ds.points[:, :-1]
        pts[:, -1] = ds.points[:, -1]
    new_spec = ManifoldSpec(spec.family, target_dim, spec.class_count)
    rotation = None
    if rotate:
        q = random_rotation(target_dim, seed)
        pts = pts @ q.T
        rotation = q
    return LabeledDataset(pts, ds.labels.copy(), new_spec, ds.provenance, rotation=rotation)


def circles_spec(ambient_dim: int, r1: float = 1.0, r2: float = 3.0) -> ManifoldSpec:
    return ManifoldSpec(ConcentricSpheres(r1=r1, r2=r2, sphere_dim=1), ambient_dim)


def spheres_spec(ambient_dim: int, sphere_dim: int, r1: float = 1.0, r2: float = 3.0) -> ManifoldSpec:
    return ManifoldSpec(ConcentricSpheres(r1=r1, r2=r2, sphere_dim=sphere_dim), ambient_dim)


def planes_spec(
    ambient_dim: int, flat_dim: int = 2, lo: float = -10.0, hi: float = 10.0, separation: float = 2.0
) -> ManifoldSpec:
    return ManifoldSpec(ParallelFlats(lo=lo, hi=hi, flat_dim=flat_dim, separation=separation), ambient_dim)


def make_circles(
    ambient_dim: int,
    n_per_class: int = 1000,
    r1: float = 1.0,
    r2: float = 3.0,
    seed: int = 0,
    rotate: bool = False,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Train/test random samples of two concentric circles (reach of the
    decision axis is (r2-r1)/2).  Train and test draw from distinct derived
    seeds; the optional rotation is shared."""
    spec = circles_spec(ambient_dim, r1, r2)
    train_seed, test_seed, rot_seed = _derive_seeds(seed, 3)
    train = random_sample_circles(spec, n_per_class, train_seed)
    test = random_sample_circles(spec, n_per_class, test_seed)
    if rotate:
        q = random_rotation(ambient_dim, rot_seed)
        train = LabeledDataset(train.points @ q.T, train.labels, spec, train.provenance, rotation=q)
        test = LabeledDataset(test.points @ q.T, test.labels, spec, test.provenance, rotation=q)
    return train, test


def make_spheres(
    ambient_dim: int,
    sphere_dim: int,
    n_per_class: int = 1000,
    r1: float = 1.0,
    r2: float = 3.0,
    seed: int = 0,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Train/test samples of two concentric spheres of arbitrary intrinsic dimension."""
    spec = spheres_spec(ambient_dim, sphere_dim, r1, r2)
    train_seed, test_seed = _derive_seeds(seed, 2)
    return (
        random_sample_circles(spec, n_per_class, train_seed),
        random_sample_circles(spec, n_per_class, test_seed),
    )


def make_planes(
    delta: float,
    ambient_dim: int,
    flat_dim: int = 2,
    lo: float = -10.0,
    hi: float = 10.0,
    strict: bool = False,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Grid-vertex training set and cell-center test set on two parallel flats."""
    if ambient_dim < flat_dim + 1:
        raise GeometryError(f"ambient_dim must be >= flat_dim + 1, got {ambient_dim}")
    spec = planes_spec(ambient_dim, flat_dim, lo, hi)
    train = grid_cover_flats(spec, delta, strict=strict)
    test = grid_cell_centers_flats(spec, delta, strict=strict)
    return train, test


def _derive_seeds(seed: int, n: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1)[0]) for s in ss.spawn(n)]


# ---------------------------------------------------------------------------
# CSV + JSON sidecar serialization


def _spec_to_json(spec: ManifoldSpec) -> dict:
    fam = spec.family
    if isinstance(fam, ConcentricSpheres):
        family = {"kind": "concentric_spheres", "r1": fam.r1, "r2": fam.r2,
                  "sphere_dim": fam.sphere_dim}
    else:
        family = {"kind": "parallel_flats", "lo": fam.lo, "hi": fam.hi,
                  "flat_dim": fam.flat_dim, "separation": fam.separation}
    return {"family": family, "ambient_dim": spec.ambient_dim, "class_count": spec.class_count}


def _spec_from_json(obj: dict) -> ManifoldSpec:
    fam = obj["family"]
    if fam["kind"] == "concentric_spheres":
        family = ConcentricSpheres(r1=fam["r1"], r2=fam["r2"], sphere_dim=fam["sphere_dim"])
    elif fam["kind"] == "parallel_flats":
        family = ParallelFlats(lo=fam["lo"], hi=fam["hi"], flat_dim=fam["flat_dim"],
                               separation=fam["separation"])
    else:
        raise DataFormatError(f"unknown family kind {fam['kind']!r}")
    return ManifoldSpec(family, obj["ambient_dim"], obj.get("class_count", 2))


def _provenance_to_json(cfg: CoverConfig) -> dict:
    return {"scheme": cfg.scheme.value, "delta": cfg.delta,
            "n_per_class": cfg.n_per_class, "seed": cfg.seed}


def _provenance_from_json(obj: dict) -> CoverConfig:
    return CoverConfig(scheme=CoverScheme(obj["scheme"]), delta=obj.get("delta"),
                       n_per_class=obj.get("n_per_class"), seed=obj.get("seed", 0))


def save_dataset(ds: LabeledDataset, base_path) -> tuple[Path, Path]:
    """Write ``<base>.csv`` (x1..xd,label rows) and ``<base>.json`` (spec sidecar).

    Floats are written with 17 significant digits so the round trip is exact.
    """
    base = Path(base_path)
    csv_path = base.with_suffix(".csv")
    json_path = base.with_suffix(".json")
    d = ds.points.shape[1]
    header = ",".join([f"x{i + 1}" for i in range(d)] + ["label"])
    with open(csv_path, "w", newline="\n") as f:
        f.write(header + "\n")
        for row, label in zip(ds.points, ds.labels):
            f.write(",".join(f"{v:.17g}" for v in row) + f",{label}\n")
    sidecar = {
        "spec": _spec_to_json(ds.spec),
        "provenance": _provenance_to_json(ds.provenance),
        "rotation": None if ds.rotation is None else ds.rotation.tolist(),
    }
    with open(json_path, "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, json_path


def load_dataset(base_path) -> LabeledDataset:
    base = Path(base_path)
    csv_path = base.with_suffix(".csv")
    json_path = base.with_suffix(".json")
    if not csv_path.exists() or not json_path.exists():
        raise DataFormatError(f"missing dataset files {csv_path} / {json_path}")
    raw = np.genfromtxt(csv_path, delimiter=",", skip_header=1, dtype=np.float64, ndmin=2)
    points, labels = raw[:, :-1], raw[:, -1].astype(np.int64)
    with open(json_path) as f:
        sidecar = json.load(f)
    rotation = sidecar.get("rotation")
    return LabeledDataset(
        points,
        labels,
        _spec_from_json(sidecar["spec"]),
        _provenance_from_json(sidecar["provenance"]),
        rotation=None if rotation is None else np.asarray(rotation, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# MNIST (IDX format: big-endian magic, dimension sizes, raw bytes)


@dataclass
class MnistSet:
    images: np.ndarray  # (n, 784) floats in [0, 1]
    labels: np.ndarray  # (n,) digits 0-9
    split: str


def _open_maybe_gzip(path: Path):
    with open(path, "rb") as probe:
        magic = probe.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path: Path, expected_magic: int) -> np.ndarray:
    with _open_maybe_gzip(path) as f:
        head = f.read(4)
        if len(head) < 4:
            raise DataFormatError(f"{path}: truncated header")
        (magic,) = struct.unpack(">i", head)
        if magic != expected_magic:
            raise DataFormatError(f"{path}: magic {magic}, expected {expected_magic}")
        ndim = magic % 256
        dims = []
        for _ in range(ndim):
            raw = f.read(4)
            if len(raw) < 4:
                raise DataFormatError(f"{path}: truncated dimension header")
            dims.append(struct.unpack(">i", raw)[0])
        expected_bytes = int(np.prod(dims))
        payload = f.read()
        if len(payload) != expected_bytes:
            raise DataFormatError(
                f"{path}: payload holds {len(payload)} bytes, header promises {expected_bytes}"
            )
        return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def _find_idx_file(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / (stem + ".gz")):
        if candidate.exists():
            return candidate
    raise DataFormatError(f"missing MNIST file {stem}[.gz] in {directory}")


def load_mnist(dir_path) -> dict[str, MnistSet]:
    """Load the four standard IDX files (plain or gzipped) from a directory.

    Pixels are scaled to [0, 1] as byte/255.  Raises ``DataFormatError`` on
    bad magic numbers, truncation, or image/label count mismatch.
    """
    directory = Path(dir_path)
    out = {}
    for split in ("train", "test"):
        images_raw = _read_idx(
            _find_idx_file(directory, MNIST_FILES[(split, "images")]), MNIST_IMAGE_MAGIC
        )
        labels_raw = _read_idx(
            _find_idx_file(directory, MNIST_FILES[(split, "labels")]), MNIST_LABEL_MAGIC
        )
        if images_raw.ndim != 3:
            raise DataFormatError(f"{split} images: expected 3 dimensions, got {images_raw.ndim}")
        if len(images_raw) != len(labels_raw):
            raise DataFormatError(
                f"{split}: {len(images_raw)} images but {len(labels_raw)} labels"
            )
        images = images_raw.reshape(len(images_raw), -1).astype(np.float64) / 255.0
        out[split] = MnistSet(images=images, labels=labels_raw.astype(np.int64), split=split)
    return out


def save_pgm(image: np.ndarray, path, side: int = 28) -> None:
    """Write a [0,1] grayscale vector or matrix as a binary PGM file."""
    img = np.asarray(image, dtype=np.float64).reshape(side, side)
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{side} {side}\n255\n".encode())
        f.write(data.tobytes())
