"""From-scratch feed-forward classifier: init, backprop, training, eval.

Plain numpy throughout. One training run is single-threaded and fully
deterministic for a given (config, data, seed); concurrency happens one
level up, across independent runs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LabelError, TrainingDivergedError

PARAMS_MAGIC = b"ATNNPAR\x00"
PARAMS_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 78
    hidden_layers: tuple[int, ...] = (256, 128, 64)
    output_classes: int = 2
    dropout_rate: float = 0.2
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 256
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if self.output_classes not in (2, 15):
            raise ValueError(f"output_classes must be 2 or 15, got {self.output_classes}")
        if self.epochs < 1 or self.batch_size < 1 or self.input_dim < 1:
            raise ValueError("epochs, batch_size and input_dim must be >= 1")
        if any(w < 1 for w in self.hidden_layers):
            raise ValueError("hidden layer widths must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden_layers, self.output_classes]
        return list(zip(sizes[:-1], sizes[1:]))


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class ModelParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: ModelConfig
    history: list[EpochStats] = field(default_factory=list)

    def copy(self) -> "ModelParams":
        return ModelParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.config,
            list(self.history),
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )


@dataclass
class EvalResult:
    """Confusion counts (rows = true class) plus derived recalls."""

    confusion: np.ndarray
    per_class_recall: np.ndarray  # NaN for classes absent from the test set
    accuracy: float

    @property
    def attack_recall(self) -> float:
        """Recall of class 1; the headline metric of binary runs."""
        return float(self.per_class_recall[1])

    @property
    def benign_recall(self) -> float:
        return float(self.per_class_recall[0])


def init_params(config: ModelConfig, seed=None) -> ModelParams:
    """Zero-mean weights with scale 1/sqrt(fan_in); zero biases.

    `seed` accepts anything numpy's default_rng does; defaults to
    config.seed.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    weights, biases = [], []
    for fan_in, fan_out in config.layer_dims:
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(weights, biases, config)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_full(
    params: ModelParams,
    x: np.ndarray,
    masks: list[np.ndarray] | None,
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Return (pre-activations, post-activations incl. input, probabilities)."""
    if x.ndim != 2 or x.shape[1] != params.config.input_dim:
        raise ValueError(
            f"batch shape {x.shape} does not match input_dim {params.config.input_dim}"
        )
    zs: list[np.ndarray] = []
    activations = [x]
    a = x
    n_hidden = len(params.weights) - 1
    for layer in range(n_hidden):
        z = a @ params.weights[layer] + params.biases[layer]
        zs.append(z)
        a = np.maximum(z, 0.0)
        if masks is not None:
            a = a * masks[layer]
        activations.append(a)
    z_out = a @ params.weights[-1] + params.biases[-1]
    zs.append(z_out)
    return zs, activations, _softmax(z_out)


def forward(
    params: ModelParams,
    batch: np.ndarray,
    training: bool = False,
    dropout_rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Class-probability matrix for a batch; dropout only when training."""
    x = np.asarray(batch, dtype=np.float64)
    masks = None
    if training and params.config.dropout_rate > 0.0:
        masks = _draw_masks(params, x.shape[0], dropout_rng or np.random.default_rng(0))
    _, _, probs = _forward_full(params, x, masks)
    return probs


def _draw_masks(params: ModelParams, rows: int, rng: np.random.Generator) -> list[np.ndarray]:
    keep = 1.0 - params.config.dropout_rate
    return [
        (rng.random((rows, w.shape[1])) < keep) / keep for w in params.weights[:-1]
    ]


def _check_labels(labels: np.ndarray, n_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        bad = y[(y < 0) | (y >= n_classes)][0]
        raise LabelError(f"label {bad} outside 0..{n_classes - 1}")
    return y.astype(np.int64)


def cross_entropy_loss(params: ModelParams, batch: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy of the batch (no dropout)."""
    x = np.asarray(batch, dtype=np.float64)
    y = _check_labels(labels, params.config.output_classes)
    zs, _, _ = _forward_full(params, x, None)
    z = zs[-1]
    with np.errstate(over="ignore", invalid="ignore"):
        logp = z - z.max(axis=1, keepdims=True)
        logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
        return float(-logp[np.arange(len(y)), y].mean())


def loss_and_grad(
    params: ModelParams,
    batch: np.ndarray,
    labels: np.ndarray,
    masks: list[np.ndarray] | None = None,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy plus its gradients w.r.t. every weight and bias.

    `masks` carries pre-drawn dropout masks during training; None means a
    plain deterministic pass (the path the finite-difference check uses).
    """
    loss, gw, gb, _ = _step(params, batch, labels, masks)
    return loss, gw, gb


def _step(
    params: ModelParams,
    batch: np.ndarray,
    labels: np.ndarray,
    masks: list[np.ndarray] | None,
) -> tuple[float, list[np.ndarray], list[np.ndarray], np.ndarray]:
    x = np.asarray(batch, dtype=np.float64)
    y = _check_labels(labels, params.config.output_classes)
    rows = x.shape[0]
    # Non-finite intermediates are expected while diverging; the caller
    # checks the loss and raises, so numeric warnings stay quiet here.
    with np.errstate(over="ignore", invalid="ignore"):
        zs, activations, probs = _forward_full(params, x, masks)
        z = zs[-1]
        logp = z - z.max(axis=1, keepdims=True)
        logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
        loss = float(-logp[np.arange(rows), y].mean())

        delta = probs.copy()
        delta[np.arange(rows), y] -= 1.0
        delta /= rows

        grads_w = [np.empty_like(w) for w in params.weights]
        grads_b = [np.empty_like(b) for b in params.biases]
        grads_w[-1] = activations[-1].T @ delta
        grads_b[-1] = delta.sum(axis=0)
        upstream = delta @ params.weights[-1].T
        for layer in range(len(params.weights) - 2, -1, -1):
            if masks is not None:
                upstream = upstream * masks[layer]
            dz = upstream * (zs[layer] > 0.0)
            grads_w[layer] = activations[layer].T @ dz
            grads_b[layer] = dz.sum(axis=0)
            if layer > 0:
                upstream = dz @ params.weights[layer].T
    return loss, grads_w, grads_b, probs


def train(
    config: ModelConfig,
    train_features: np.ndarray,
    train_labels: np.ndarray,
    val_features: np.ndarray | None = None,
    val_labels: np.ndarray | None = None,
) -> ModelParams:
    """Mini-batch gradient descent with momentum for config.epochs epochs.

    Per-epoch train metrics average the training batches; validation gets
    a full deterministic pass. The returned parameters are the checkpoint
    with the best validation accuracy (final parameters when no validation
    set is given). Raises TrainingDivergedError on a non-finite loss.
    """
    x = np.asarray(train_features, dtype=np.float64)
    y = _check_labels(train_labels, config.output_classes)
    if x.shape[0] == 0:
        raise ValueError("training set is empty")
    has_val = val_features is not None and len(val_features) > 0
    if has_val:
        xv = np.asarray(val_features, dtype=np.float64)
        yv = _check_labels(val_labels, config.output_classes)

    seeds = np.random.SeedSequence(config.seed).spawn(2)
    params = init_params(config, seed=seeds[0])
    rng = np.random.default_rng(seeds[1])
    velocity_w = [np.zeros_like(w) for w in params.weights]
    velocity_b = [np.zeros_like(b) for b in params.biases]
    use_dropout = config.dropout_rate > 0.0

    best: ModelParams | None = None
    best_acc = -1.0
    history: list[EpochStats] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(x.shape[0])
        batch_losses, batch_hits, seen = [], 0, 0
        for start in range(0, x.shape[0], config.batch_size):
            take = order[start : start + config.batch_size]
            xb, yb = x[take], y[take]
            masks = _draw_masks(params, xb.shape[0], rng) if use_dropout else None
            loss, gw, gb, probs = _step(params, xb, yb, masks)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            batch_losses.append(loss * xb.shape[0])
            batch_hits += int((probs.argmax(axis=1) == yb).sum())
            seen += xb.shape[0]
            for i in range(len(params.weights)):
                velocity_w[i] = config.momentum * velocity_w[i] - config.learning_rate * gw[i]
                velocity_b[i] = config.momentum * velocity_b[i] - config.learning_rate * gb[i]
                params.weights[i] += velocity_w[i]
                params.biases[i] += velocity_b[i]
        if not params.all_finite():
            raise TrainingDivergedError(epoch, f"non-finite parameters at epoch {epoch}")

        train_loss = float(np.sum(batch_losses) / seen)
        train_acc = batch_hits / seen
        if has_val:
            val_result = evaluate(params, xv, yv)
            val_loss = cross_entropy_loss(params, xv, yv)
            val_acc = val_result.accuracy
        else:
            val_loss, val_acc = float("nan"), float("nan")
        history.append(EpochStats(epoch, train_loss, train_acc, val_loss, val_acc))
        if has_val and val_acc > best_acc:
            best_acc = val_acc
            best = params.copy()

    final = best if (has_val and best is not None) else params.copy()
    final.history = history
    return final


def evaluate(params: ModelParams, features: np.ndarray, labels: np.ndarray, batch_size: int = 8192) -> EvalResult:
    """Confusion counts and per-class recall over a test set (no dropout)."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("test set is empty")
    n_classes = params.config.output_classes
    y = _check_labels(labels, n_classes)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for start in range(0, x.shape[0], batch_size):
        xb = x[start : start + batch_size]
        yb = y[start : start + batch_size]
        preds = forward(params, xb).argmax(axis=1)
        np.add.at(confusion, (yb, preds), 1)
    row_sums = confusion.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        recall = np.where(row_sums > 0, np.diag(confusion) / row_sums, np.nan)
    accuracy = float(np.trace(confusion) / confusion.sum())
    return EvalResult(confusion, recall, accuracy)


def save_params(path: str | Path, params: ModelParams) -> None:
    """Versioned binary dump: magic, JSON config echo, float64 LE tensors."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cfg = params.config
    header = {
        "config": {
            "input_dim": cfg.input_dim,
            "hidden_layers": list(cfg.hidden_layers),
            "output_classes": cfg.output_classes,
            "dropout_rate": cfg.dropout_rate,
            "learning_rate": cfg.learning_rate,
            "momentum": cfg.momentum,
            "batch_size": cfg.batch_size,
            "epochs": cfg.epochs,
            "seed": cfg.seed,
        },
        "shapes": [list(w.shape) for w in params.weights],
        "history": [
            [h.epoch, h.train_loss, h.train_acc, h.val_loss, h.val_acc]
            for h in params.history
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(PARAMS_MAGIC)
        fh.write(struct.pack("<HI", PARAMS_VERSION, len(blob)))
        fh.write(blob)
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, "<f8").tobytes())
            fh.write(np.ascontiguousarray(b, "<f8").tobytes())


def load_params(path: str | Path) -> ModelParams:
    path = Path(path)
    with path.open("rb") as fh:
        if fh.read(len(PARAMS_MAGIC)) != PARAMS_MAGIC:
            raise ValueError(f"{path}: not a model parameter file")
        version, header_len = struct.unpack("<HI", fh.read(6))
        if version != PARAMS_VERSION:
            raise ValueError(f"{path}: unsupported parameter file version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        cfg = ModelConfig(
            input_dim=header["config"]["input_dim"],
            hidden_layers=tuple(header["config"]["hidden_layers"]),
            output_classes=header["config"]["output_classes"],
            dropout_rate=header["config"]["dropout_rate"],
            learning_rate=header["config"]["learning_rate"],
            momentum=header["config"]["momentum"],
            batch_size=header["config"]["batch_size"],
            epochs=header["config"]["epochs"],
            seed=header["config"]["seed"],
        )
        weights, biases = [], []
        for rows, cols in header["shapes"]:
            weights.append(
                np.frombuffer(fh.read(rows * cols * 8), dtype="<f8").reshape(rows, cols).copy()
            )
            biases.append(np.frombuffer(fh.read(cols * 8), dtype="<f8").copy())
    history = [EpochStats(*row) for row in header["history"]]
    return ModelParams(weights, biases, cfg, history)
