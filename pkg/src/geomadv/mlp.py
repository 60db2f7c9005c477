"""Fully connected ReLU network with manual backpropagation.

Defaults reproduce the training protocol used throughout the experiments:
cross-entropy loss, 250 epochs, Adam at lr=0.1 with beta1=0.9/beta2=0.999,
or SGD at lr=0.1 decayed by 10x every 100 epochs.  Training is bitwise
deterministic given the config seed: weight init, shuffling, and any
adversary random starts all derive from it.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import NormKind


class ModelError(ValueError):
    """Malformed model input or checkpoint."""


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class PgdConfig:
    """Projected-gradient adversary settings (also the training adversary)."""

    eps: float
    step: float = 0.05
    iters: int = 30
    norm: NormKind = NormKind.L2
    random_start: bool = True

    def __post_init__(self):
        if self.step <= 0:
            raise ModelError(f"step must be > 0, got {self.step}")
        if self.iters < 1:
            raise ModelError(f"iters must be >= 1, got {self.iters}")
        if self.eps < 0:
            raise ModelError(f"eps must be >= 0, got {self.eps}")


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"  # "adam" or "sgd"
    lr: float = 0.1
    epochs: int = 250
    batch_size: int | None = None  # None: full batch up to 4096 points, else 128
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    sgd_decay_factor: float = 10.0
    sgd_decay_every: int = 100
    adversary: PgdConfig | None = None

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ModelError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 0:
            raise ModelError(f"epochs must be >= 0, got {self.epochs}")

    def resolve_batch_size(self, n: int) -> int:
        if self.batch_size is not None:
            return min(self.batch_size, n)
        return n if n <= 4096 else 128

    def config_hash(self) -> str:
        blob = json.dumps(_config_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _config_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    if cfg.adversary is not None:
        d["adversary"]["norm"] = cfg.adversary.norm.value
    return d


class MlpModel:
    """ReLU MLP: weights[i] has shape (layer_dims[i], layer_dims[i+1]), logits out."""

    def __init__(self, layer_dims, weights, biases, seed: int | None = None):
        self.layer_dims = list(int(d) for d in layer_dims)
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.seed = seed
        self.train_config: TrainConfig | None = None
        self.optimizer_state: dict | None = None
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ModelError("layer_dims and parameter counts disagree")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_dims[i], self.layer_dims[i + 1]):
                raise ModelError(f"weight {i} has shape {w.shape}, expected "
                                 f"({self.layer_dims[i]}, {self.layer_dims[i + 1]})")
            if b.shape != (self.layer_dims[i + 1],):
                raise ModelError(f"bias {i} has shape {b.shape}")

    @classmethod
    def init(cls, layer_dims, seed: int = 0) -> "MlpModel":
        """Fan-in-scaled uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(layer_dims, weights, biases, seed=seed)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def class_count(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpModel":
        m = MlpModel(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            seed=self.seed,
        )
        m.train_config = self.train_config
        m.optimizer_state = self.optimizer_state
        return m

    def forward(self, batch: np.ndarray) -> np.ndarray:
        """Logits for a batch; hidden layers ReLU, output identity."""
        x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
        if x.shape[1] != self.input_dim:
            raise ModelError(f"batch width {x.shape[1]} != input dim {self.input_dim}")
        if not np.all(np.isfinite(x)):
            raise ModelError("non-finite input")
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def predict(self, batch: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward(batch), axis=1)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-stable softmax (max subtraction before exponentiation)."""
    z = logits - np.max(logits, axis=1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=1, keepdims=True)


def loss_and_grads(model: MlpModel, batch: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy plus gradients for every parameter and the inputs.

    Returns (loss, weight_grads, bias_grads, input_grad).  Labels are
    0-based class indices.
    """
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if y.min(initial=0) < 0 or y.max(initial=0) >= model.class_count:
        raise ModelError("labels out of range for the model's class count")

    # forward, caching activations
    acts = [x]
    pre = []
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    logits = h @ model.weights[-1] + model.biases[-1]

    probs = softmax(logits)
    n = len(x)
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))

    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n

    w_grads = [None] * len(model.weights)
    b_grads = [None] * len(model.biases)
    delta = dlogits
    for layer in range(len(model.weights) - 1, -1, -1):
        w_grads[layer] = acts[layer].T @ delta
        b_grads[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (pre[layer - 1] > 0.0)
        else:
            delta = delta @ model.weights[layer].T
    return loss, w_grads, b_grads, delta


def input_gradients(model: MlpModel, batch: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to each input row."""
    return loss_and_grads(model, batch, labels)[3]


def train(model: MlpModel, points: np.ndarray, labels: np.ndarray, config: TrainConfig):
    """Train a copy of ``model``; returns (trained_model, per_epoch_losses).

    Labels are 0-based.  When ``config.adversary`` is set, every batch is
    replaced by PGD-perturbed points before the gradient step.
    """
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if len(x) != len(y):
        raise ModelError("points and labels lengths differ")
    out = model.copy()
    rng = np.random.default_rng(config.seed)
    n = len(x)
    batch = config.resolve_batch_size(n)

    adam_m = [np.zeros_like(w) for w in out.weights] + [np.zeros_like(b) for b in out.biases]
    adam_v = [np.zeros_like(g) for g in adam_m]
    adam_t = 0
    losses = []

    for epoch in range(config.epochs):
        if config.optimizer == "sgd":
            lr = config.lr / config.sgd_decay_factor ** (epoch // config.sgd_decay_every)
        else:
            lr = config.lr
        order = rng.permutation(n)
        epoch_loss = 0.0
        seen = 0
        for start in range(0, n, batch):
            take = order[start : start + batch]
            xb, yb = x[take], y[take]
            if config.adversary is not None:
                from .attacks import pgd_points  # deferred: attacks imports this module

                adv_seed = int(rng.integers(0, 2**63 - 1))
                xb = pgd_points(out, xb, yb, config.adversary, seed=adv_seed)
            loss, w_g, b_g, _ = loss_and_grads(out, xb, yb)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            epoch_loss += loss * len(take)
            seen += len(take)
            grads = w_g + b_g
            params = out.weights + out.biases
            if config.optimizer == "adam":
                adam_t += 1
                b1, b2 = config.adam_beta1, config.adam_beta2
                for p, g, m, v in zip(params, grads, adam_m, adam_v):
                    m *= b1
                    m += (1.0 - b1) * g
                    v *= b2
                    v += (1.0 - b2) * g * g
                    m_hat = m / (1.0 - b1**adam_t)
                    v_hat = v / (1.0 - b2**adam_t)
                    p -= lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
            else:
                for p, g in zip(params, grads):
                    p -= lr * g
        losses.append(epoch_loss / max(seen, 1))

    out.train_config = config
    out.optimizer_state = (
        {"t": adam_t} if config.optimizer == "adam" else {"final_lr": lr if config.epochs else config.lr}
    )
    return out, np.array(losses)


def train_fresh(layer_dims, points, labels, config: TrainConfig):
    """Initialize from the config seed and train; the canonical pipeline entry."""
    model = MlpModel.init(layer_dims, seed=config.seed)
    return train(model, points, labels, config)


_MAGIC = b"GADVMLP1"


def save_checkpoint(model: MlpModel, path) -> None:
    """Write magic, length-prefixed JSON header, then a little-endian f64 weight blob."""
    header = {
        "layer_dims": model.layer_dims,
        "seed": model.seed,
        "config_hash": model.train_config.config_hash() if model.train_config else None,
    }
    hdr = json.dumps(header, sort_keys=True).encode()
    blob = np.concatenate(
        [w.ravel() for w in model.weights] + [b.ravel() for b in model.biases]
    ).astype("<f8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        f.write(blob.tobytes())


def load_checkpoint(path) -> MlpModel:
    with open(path, "rb") as f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ModelError(f"bad checkpoint magic {magic!r}")
        (hdr_len,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hdr_len).decode())
        blob = f.read()
    dims = header["layer_dims"]
    expected = sum(a * b for a, b in zip(dims[:-1], dims[1:])) + sum(dims[1:])
    flat = np.frombuffer(blob, dtype="<f8")
    if len(flat) != expected:
        raise ModelError(
            f"checkpoint blob holds {len(flat)} floats, layer dims {dims} need {expected}"
        )
    weights, biases = [], []
    pos = 0
    for a, b in zip(dims[:-1], dims[1:]):
        weights.append(flat[pos : pos + a * b].reshape(a, b).copy())
        pos += a * b
    for b in dims[1:]:
        biases.append(flat[pos : pos + b].copy())
        pos += b
    return MlpModel(dims, weights, biases, seed=header.get("seed"))
