"""Feed-forward surrogate mapping (geometry, frequency) to absorption.

A fully-connected network of layer sizes [11, 200, 200, 200, 1] with
sigmoid activations throughout (so predictions live strictly inside
(0, 1), like the absorption coefficient). Inputs are the ten cell
design variables plus the frequency, each min-max normalized against
its design bound. Training is plain mini-batch Adam on mean squared
error, fully deterministic for a fixed seed; backpropagation, Adam and
the metrics (MAPE with a small-target exclusion floor, Pearson r) are
implemented here directly on numpy arrays.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .acoustics import CELL_BOUNDS, GENE_ORDER

LAYER_SIZES = (11, 200, 200, 200, 1)
FREQUENCY_BAND_HZ = (10.0, 10000.0)
MAPE_TARGET_FLOOR = 1.0e-3

INPUT_NAMES = GENE_ORDER + ("frequency_Hz",)


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; carries the offending epoch index."""

    def __init__(self, epoch):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class Normalizer:
    """Per-input min-max scaling onto [0, 1]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("bounds must be 1-D arrays of equal length")
        if np.any(hi <= lo):
            raise ValueError("upper bound must exceed lower bound for every input")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def for_design_band(cls):
        """Bounds of the ten design variables plus the frequency band."""
        lo = [CELL_BOUNDS[g][0] for g in GENE_ORDER] + [FREQUENCY_BAND_HZ[0]]
        hi = [CELL_BOUNDS[g][1] for g in GENE_ORDER] + [FREQUENCY_BAND_HZ[1]]
        return cls(np.array(lo), np.array(hi))

    def normalize(self, raw):
        return (np.asarray(raw, dtype=float) - self.lower) / (self.upper - self.lower)

    def denormalize(self, scaled):
        return self.lower + np.asarray(scaled, dtype=float) * (self.upper - self.lower)


class Mlp:
    """Weights and biases of the fixed-architecture network.

    weights[l] has shape (fan_in, fan_out); biases[l] has shape (fan_out,).
    """

    def __init__(self, weights, biases):
        sizes = LAYER_SIZES
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ValueError("expected one weight/bias pair per layer")
        for l, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[l], sizes[l + 1]) or b.shape != (sizes[l + 1],):
                raise ValueError(f"layer {l}: bad shapes {w.shape}, {b.shape}")
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]

    def copy(self):
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_mlp(seed):
    """Xavier-uniform weights, zero biases, from one integer seed."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases)


def _forward_pass(net, x_normalized):
    """All layer activations for a (n, 11) batch; last entry is the output."""
    activations = [np.asarray(x_normalized, dtype=float)]
    for w, b in zip(net.weights, net.biases):
        activations.append(_sigmoid(activations[-1] @ w + b))
    return activations


def forward(net, normalized_input):
    """Network output for one normalized 11-vector or an (n, 11) batch."""
    x = np.asarray(normalized_input, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")
    single = x.ndim == 1
    out = _forward_pass(net, x[None, :] if single else x)[-1][:, 0]
    return float(out[0]) if single else out


def backprop_gradient(net, x_normalized, targets):
    """Exact gradient of the batch MSE for every weight and bias.

    Returns (weight_grads, bias_grads) shaped like the network parameters.
    """
    x = np.atleast_2d(np.asarray(x_normalized, dtype=float))
    y = np.asarray(targets, dtype=float).reshape(-1, 1)
    if x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise ValueError("batch inputs and targets must align and be non-empty")
    acts = _forward_pass(net, x)
    n = x.shape[0]
    delta = 2.0 * (acts[-1] - y) / n * acts[-1] * (1.0 - acts[-1])
    weight_grads = [None] * len(net.weights)
    bias_grads = [None] * len(net.biases)
    for l in range(len(net.weights) - 1, -1, -1):
        weight_grads[l] = acts[l].T @ delta
        bias_grads[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l].T) * acts[l] * (1.0 - acts[l])
    return weight_grads, bias_grads


def batch_mse(net, x_normalized, targets):
    pred = forward(net, np.atleast_2d(x_normalized))
    return float(np.mean((pred - np.asarray(targets, dtype=float)) ** 2))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0021
    batch_size: int = 100
    epochs: int = 800
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1.0e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epochs must be at least 1")


TAG_TRAIN = "train"
TAG_VALIDATION = "val"
TAG_TEST = "test"


@dataclass(frozen=True)
class LabeledDataset:
    """Raw input rows, absorption targets, and train/val/test tags."""

    inputs: np.ndarray
    targets: np.ndarray
    tags: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        tags = np.asarray(self.tags)
        if x.ndim != 2 or x.shape[1] != LAYER_SIZES[0]:
            raise ValueError(f"inputs must be (n, {LAYER_SIZES[0]})")
        if y.shape != (x.shape[0],) or tags.shape != (x.shape[0],):
            raise ValueError("targets/tags must align with inputs")
        if np.any(y < 0.0) or np.any(y > 1.0):
            raise ValueError("targets must lie in [0, 1]")
        known = {TAG_TRAIN, TAG_VALIDATION, TAG_TEST}
        if not set(np.unique(tags)) <= known:
            raise ValueError(f"tags must be drawn from {sorted(known)}")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "tags", tags)

    def subset(self, tag):
        sel = self.tags == tag
        return self.inputs[sel], self.targets[sel]


def split(inputs, targets, seed):
    """Tag rows 70 % train-pool / 30 % test, then 20 % of the pool validation."""
    x = np.asarray(inputs, dtype=float)
    n = x.shape[0]
    if n < 10:
        raise ValueError("need at least 10 rows to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_pool = round(0.7 * n)
    n_val = round(0.2 * n_pool)
    tags = np.empty(n, dtype="<U5")
    tags[order[: n_pool - n_val]] = TAG_TRAIN
    tags[order[n_pool - n_val : n_pool]] = TAG_VALIDATION
    tags[order[n_pool:]] = TAG_TEST
    return LabeledDataset(x, np.asarray(targets, dtype=float), tags)


@dataclass(frozen=True)
class TrainingTrace:
    """Per-epoch mean train loss and end-of-epoch validation loss."""

    train_mse: np.ndarray
    validation_mse: np.ndarray
    initial_validation_mse: float


def train(net, data, cfg, normalizer):
    """Mini-batch Adam on MSE; returns (trained net, TrainingTrace).

    The incoming net is not modified. Row shuffling uses a generator
    seeded from cfg.seed, so the whole run is reproducible bit-for-bit
    in single-threaded numpy.
    """
    x_train_raw, y_train = data.subset(TAG_TRAIN)
    x_val_raw, y_val = data.subset(TAG_VALIDATION)
    if x_train_raw.shape[0] == 0:
        raise ValueError("dataset has no train rows")
    x_train = normalizer.normalize(x_train_raw)
    x_val = normalizer.normalize(x_val_raw) if x_val_raw.shape[0] else None

    net = net.copy()
    rng = np.random.default_rng(cfg.seed)
    params = net.weights + net.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0

    def val_mse():
        if x_val is None:
            return float("nan")
        return batch_mse(net, x_val, y_val)

    initial_val = val_mse()
    train_trace = np.empty(cfg.epochs)
    val_trace = np.empty(cfg.epochs)
    n = x_train.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            xb, yb = x_train[batch], y_train[batch]
            wg, bg = backprop_gradient(net, xb, yb)
            grads = wg + bg
            step += 1
            lr_t = cfg.learning_rate * np.sqrt(1.0 - cfg.beta2**step) / (1.0 - cfg.beta1**step)
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= cfg.beta1
                mi += (1.0 - cfg.beta1) * g
                vi *= cfg.beta2
                vi += (1.0 - cfg.beta2) * g * g
                p -= lr_t * mi / (np.sqrt(vi) + cfg.epsilon)
            epoch_losses.append(batch_mse(net, xb, yb))
        train_trace[epoch] = float(np.mean(epoch_losses))
        val_trace[epoch] = val_mse()
        if not np.isfinite(train_trace[epoch]):
            raise TrainingDivergedError(epoch)
    return net, TrainingTrace(train_trace, val_trace, initial_val)


def mape(predictions, targets, floor=MAPE_TARGET_FLOOR):
    """Mean absolute percentage error over rows with |target| > floor.

    Returns (percentage, excluded_row_count); raises if every row is
    excluded.
    """
    pred = np.asarray(predictions, dtype=float)
    targ = np.asarray(targets, dtype=float)
    keep = np.abs(targ) > floor
    excluded = int(np.count_nonzero(~keep))
    if not np.any(keep):
        raise ValueError("every target is below the MAPE floor")
    value = 100.0 * float(np.mean(np.abs(pred[keep] - targ[keep]) / np.abs(targ[keep])))
    return value, excluded


def pearson_r(predictions, targets):
    """Sample Pearson correlation; raises on fewer than 2 rows or zero variance."""
    pred = np.asarray(predictions, dtype=float)
    targ = np.asarray(targets, dtype=float)
    if pred.size < 2:
        raise ValueError("need at least 2 rows")
    dp = pred - pred.mean()
    dt = targ - targ.mean()
    denom = np.sqrt(np.sum(dp * dp) * np.sum(dt * dt))
    if denom == 0.0:
        raise ValueError("zero variance in predictions or targets")
    return float(np.sum(dp * dt) / denom)


def predict_spectrum(net, normalizer, cell, frequency_hz):
    """Predicted absorption of one cell over a frequency array."""
    f = np.asarray(frequency_hz, dtype=float)
    rows = np.empty((f.size, LAYER_SIZES[0]))
    rows[:, :-1] = cell.as_array()
    rows[:, -1] = f
    return forward(net, normalizer.normalize(rows))


# ---------------------------------------------------------------------------
# file formats

DATASET_HEADER = list(INPUT_NAMES) + ["absorption"]


def write_dataset_csv(path, inputs, targets):
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_HEADER)
        for row, target in zip(inputs, targets):
            writer.writerow(["%.12g" % v for v in row] + ["%.12g" % target])


def read_dataset_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != DATASET_HEADER:
            raise ValueError(f"unexpected dataset header {header!r}")
        for row in reader:
            rows.append([float(v) for v in row])
    arr = np.array(rows, dtype=float)
    return arr[:, :-1], arr[:, -1]


def save_model(path, net, normalizer, material_name, cfg, metrics):
    payload = {
        "layer_sizes": list(LAYER_SIZES),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "normalizer": {"lower": normalizer.lower.tolist(), "upper": normalizer.upper.tolist()},
        "material": material_name,
        "train_config": {
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "epochs": cfg.epochs,
            "beta1": cfg.beta1,
            "beta2": cfg.beta2,
            "epsilon": cfg.epsilon,
            "seed": cfg.seed,
        },
        "metrics": metrics,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_model(path):
    """Returns (net, normalizer, material name, TrainConfig, metrics dict)."""
    with open(path) as fh:
        payload = json.load(fh)
    if tuple(payload["layer_sizes"]) != LAYER_SIZES:
        raise ValueError(f"unsupported layer sizes {payload['layer_sizes']}")
    net = Mlp(
        [np.array(w, dtype=float) for w in payload["weights"]],
        [np.array(b, dtype=float) for b in payload["biases"]],
    )
    norm = Normalizer(
        np.array(payload["normalizer"]["lower"], dtype=float),
        np.array(payload["normalizer"]["upper"], dtype=float),
    )
    cfg = TrainConfig(**payload["train_config"])
    return net, norm, payload["material"], cfg, payload["metrics"]
