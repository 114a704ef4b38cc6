"""From-scratch feedforward regressor for beam lifetimes.

Six dense layers (12 -> 128 -> 256 -> 512 -> 256 -> 64 -> 1), LeakyReLU(0.01)
and inverted dropout(0.2) on the hidden layers, ReLU on the output so
predictions stay nonnegative.  Training is plain minibatch AdamW (decoupled
weight decay) on a smooth-L1 loss with a reduce-on-plateau learning-rate
schedule, all in double precision so finite-difference gradient checks stay
tight.  No autodiff framework: forward caches what backward needs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .util import canonical_json, sha256_text

DEFAULT_WIDTHS = (12, 128, 256, 512, 256, 64, 1)

FORMAT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the offending epoch/batch context."""


@dataclass
class TrainConfig:
    batch_size: int = 64
    epochs: int = 100
    beta_s: float = 1.0            # smooth-L1 quadratic/linear transition
    lr: float = 1e-3
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup_epochs: int = 2         # linear ramp to lr; tames Adam's opening steps
    plateau_factor: float = 0.5
    plateau_patience: int = 5
    min_lr: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epochs must be at least 1")
        if self.beta_s <= 0.0:
            raise ValueError("beta_s must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "batch_size", "epochs", "beta_s", "lr", "weight_decay", "beta1", "beta2",
            "eps", "warmup_epochs", "plateau_factor", "plateau_patience", "min_lr", "seed")}


class FnnModel:
    """Dense network with per-layer weights/biases and an attached normalizer."""

    def __init__(self, widths=DEFAULT_WIDTHS, negative_slope: float = 0.01,
                 dropout: float = 0.2, normalizer=None, metadata: dict | None = None):
        self.widths = tuple(int(w) for w in widths)
        if len(self.widths) < 2:
            raise ValueError("need at least one layer")
        self.negative_slope = float(negative_slope)
        self.dropout = float(dropout)
        self.weights: list[np.ndarray] = [
            np.zeros((a, b)) for a, b in zip(self.widths[:-1], self.widths[1:])]
        self.biases: list[np.ndarray] = [np.zeros(b) for b in self.widths[1:]]
        self.normalizer = normalizer
        self.metadata = dict(metadata or {})

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @classmethod
    def initialized(cls, rng: np.random.Generator, widths=DEFAULT_WIDTHS,
                    head_scale: float = 0.01, **kwargs) -> "FnnModel":
        """Uniform fan-in init with the LeakyReLU gain; zero biases.

        The output layer is scaled down by head_scale: the targets are small
        positive numbers, and a full-variance ReLU head swings so hard in the
        first epoch that Adam-sized steps can push every pre-activation
        negative, killing the head permanently.  Pass head_scale=1.0 for a
        fully random network (gradient-check probes).
        """
        model = cls(widths=widths, **kwargs)
        gain = math.sqrt(2.0 / (1.0 + model.negative_slope**2))
        for i, w in enumerate(model.weights):
            bound = gain * math.sqrt(3.0 / w.shape[0])
            if i == len(model.weights) - 1:
                bound *= head_scale
            model.weights[i] = rng.uniform(-bound, bound, size=w.shape)
        return model

    def parameters(self) -> list[np.ndarray]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def set_parameters(self, params: list[np.ndarray]) -> None:
        for i in range(self.num_layers):
            self.weights[i] = params[2 * i]
            self.biases[i] = params[2 * i + 1]

    def forward(self, x: np.ndarray, train: bool = False, rng=None):
        """Network output for a sample or batch of normalized inputs.

        Eval mode returns the (B,) prediction.  Train mode needs an rng for
        the dropout masks and returns (prediction, cache); dropout uses
        inverted 1/(1-p) scaling so eval applies no rescale.
        """
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.widths[0]:
            raise ValueError(f"expected input width {self.widths[0]}, got {x.shape[1]}")
        if train and rng is None:
            raise ValueError("train-mode forward needs an rng for dropout")

        cache = []
        a = x
        for i in range(self.num_layers - 1):
            z = a @ self.weights[i] + self.biases[i]
            act = np.where(z > 0.0, z, self.negative_slope * z)
            mask = None
            if train and self.dropout > 0.0:
                keep = 1.0 - self.dropout
                mask = (rng.random(act.shape) < keep) / keep
                act = act * mask
            cache.append((a, z, mask))
            a = act
        z_out = a @ self.weights[-1] + self.biases[-1]
        y = np.maximum(z_out, 0.0)
        cache.append((a, z_out, None))
        y = y[:, 0]
        if squeeze:
            y = y[0]
        return (y, cache) if train else y

    def predict_tb(self, raw_features: np.ndarray) -> float:
        return predict_tb(self, raw_features)


def smooth_l1(pred: np.ndarray, target: np.ndarray, beta_s: float = 1.0):
    """Mean smooth-L1 loss and its gradient with respect to pred.

    Per element e = pred - target: 0.5*e^2/beta inside |e| < beta, |e| - beta/2
    outside; the returned gradient is of the batch mean (includes the 1/B).
    """
    if beta_s <= 0.0:
        raise ValueError("beta_s must be positive")
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    e = pred - target
    abs_e = np.abs(e)
    quad = abs_e < beta_s
    losses = np.where(quad, 0.5 * e * e / beta_s, abs_e - 0.5 * beta_s)
    grad = np.where(quad, e / beta_s, np.sign(e)) / e.size
    return float(np.mean(losses)), grad


def backward(model: FnnModel, cache, dloss_dpred: np.ndarray) -> list[np.ndarray]:
    """Exact parameter gradients from a train-mode forward cache.

    Subgradient conventions: LeakyReLU at 0 uses the negative-side slope, the
    output ReLU at 0 uses 0.  Returns gradients in parameters() order.
    """
    if len(cache) != model.num_layers:
        raise ValueError("cache does not match the model depth")
    d = np.asarray(dloss_dpred, dtype=float)
    if d.ndim == 1:
        d = d[:, None]

    grads: list[np.ndarray] = [None] * (2 * model.num_layers)
    a_in, z_out, _ = cache[-1]
    dz = d * (z_out > 0.0)
    grads[-2] = a_in.T @ dz
    grads[-1] = dz.sum(axis=0)
    da = dz @ model.weights[-1].T

    for i in range(model.num_layers - 2, -1, -1):
        a_in, z, mask = cache[i]
        if mask is not None:
            da = da * mask
        dz = da * np.where(z > 0.0, 1.0, model.negative_slope)
        grads[2 * i] = a_in.T @ dz
        grads[2 * i + 1] = dz.sum(axis=0)
        if i > 0:
            da = dz @ model.weights[i].T
    return grads


@dataclass
class OptimizerState:
    """AdamW accumulators; lr is mutable so a scheduler can anneal it."""

    lr: float = 1e-3
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], **kwargs) -> "OptimizerState":
        state = cls(**kwargs)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        return state


def adamw_step(params: list[np.ndarray], grads: list[np.ndarray],
               state: OptimizerState) -> list[np.ndarray]:
    """One decoupled-weight-decay Adam update, in place on params.

    Weight decay multiplies the parameter directly (p -= lr*wd*p); it is never
    folded into the gradient, so zero gradients decay exactly geometrically.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state length mismatch")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch at parameter {i}: {p.shape} vs {g.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p -= state.lr * (m_hat / (np.sqrt(v_hat) + state.eps) + state.weight_decay * p)
    return params


def _eval_loss(model: FnnModel, x: np.ndarray, y: np.ndarray, beta_s: float,
               chunk: int = 4096) -> float:
    total = 0.0
    for c0 in range(0, x.shape[0], chunk):
        c1 = min(c0 + chunk, x.shape[0])
        pred = model.forward(x[c0:c1])
        loss, _ = smooth_l1(pred, y[c0:c1], beta_s)
        total += loss * (c1 - c0)
    return total / x.shape[0]


def train(model: FnnModel, splits, cfg: TrainConfig):
    """Minibatch AdamW training with best-on-validation model selection.

    `splits` provides normalized arrays (x_train, y_train, x_val, y_val).
    The learning rate ramps linearly over the warmup epochs, then halves on a
    validation plateau.  Returns (model restored to its best-validation
    parameters, history) where history rows carry epoch, train_loss, val_loss
    and the lr in effect.
    """
    x_train, y_train, x_val, y_val = splits
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("training and validation splits must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    if model.biases[-1][0] == 0.0:
        # Start the output head at the mean target.  Targets are small
        # positives, so a zero-started ReLU head sits half-dead and can die
        # outright before learning anything.
        model.biases[-1][0] = float(np.mean(y_train))
    state = OptimizerState.for_params(
        model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay,
        beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)

    n_batches = max(1, math.ceil(x_train.shape[0] / cfg.batch_size))
    warmup_steps = cfg.warmup_epochs * n_batches
    base_lr = cfg.lr
    best_val = math.inf
    best_params = [p.copy() for p in model.parameters()]
    plateau = 0
    step = 0
    history = []

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(x_train.shape[0])
        loss_sum = 0.0
        for b0 in range(0, order.size, cfg.batch_size):
            step += 1
            if warmup_steps > 0 and step <= warmup_steps:
                state.lr = base_lr * step / warmup_steps
            idx = order[b0:b0 + cfg.batch_size]
            pred, cache = model.forward(x_train[idx], train=True, rng=rng)
            loss, dpred = smooth_l1(pred, y_train[idx], cfg.beta_s)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, batch {b0 // cfg.batch_size}")
            grads = backward(model, cache, dpred)
            adamw_step(model.parameters(), grads, state)
            loss_sum += loss * idx.size
        train_loss = loss_sum / order.size
        val_loss = _eval_loss(model, x_val, y_val, cfg.beta_s)
        if not math.isfinite(val_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")

        if val_loss < best_val:
            best_val = val_loss
            best_params = [p.copy() for p in model.parameters()]
            plateau = 0
        elif step > warmup_steps:
            plateau += 1
            if plateau > cfg.plateau_patience:
                base_lr = max(base_lr * cfg.plateau_factor, cfg.min_lr)
                state.lr = base_lr
                plateau = 0
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss, "lr": state.lr})

    model.set_parameters(best_params)
    model.metadata["best_val_loss"] = best_val
    model.metadata["train_config"] = cfg.to_dict()
    return model, history


def predict_tb(model: FnnModel, raw_features: np.ndarray, floor_s: float | None = None) -> float:
    """Beam-lifetime prediction in seconds from raw (unnormalized) features.

    Normalizes, runs an eval-mode forward, clips the normalized output into
    the label support [0, 1] (anything beyond is extrapolation and would blow
    up the exponential rescale), rescales, and floors the result at one
    solver grid step so a predicted lifetime can never schedule a zero-length
    beam period.
    """
    if model.normalizer is None:
        raise ValueError("model has no fitted normalizer attached")
    if floor_s is None:
        floor_s = float(model.metadata.get("floor_s", 5e-4))
    x = model.normalizer.transform(np.asarray(raw_features, dtype=float))
    y = min(max(float(model.forward(x)), 0.0), 1.0)
    tb = float(model.normalizer.inverse_label(y))
    return max(tb, floor_s)


def predict_tb_batch(model: FnnModel, raw_features: np.ndarray,
                     floor_s: float | None = None) -> np.ndarray:
    """Vectorized predict_tb over a (B, 12) stack of raw feature vectors."""
    if model.normalizer is None:
        raise ValueError("model has no fitted normalizer attached")
    if floor_s is None:
        floor_s = float(model.metadata.get("floor_s", 5e-4))
    x = model.normalizer.transform(np.asarray(raw_features, dtype=float))
    y = np.clip(model.forward(x), 0.0, 1.0)
    return np.maximum(model.normalizer.inverse_label(y), floor_s)


def _model_payload(model: FnnModel) -> dict:
    norm = None
    if model.normalizer is not None:
        norm = {
            "mean": model.normalizer.mean.tolist(),
            "std": model.normalizer.std.tolist(),
            "label_floor": model.normalizer.label_floor,
            "label_scale": model.normalizer.label_scale,
        }
    return {
        "format_version": FORMAT_VERSION,
        "architecture": {
            "widths": list(model.widths),
            "negative_slope": model.negative_slope,
            "dropout": model.dropout,
        },
        "normalizer": norm,
        "metadata": model.metadata,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }


def save_model(model: FnnModel, path) -> None:
    """Serialize to a single self-describing JSON file with a checksum.

    Floats are written with repr-exact text, so save -> load -> save is
    byte-identical and parameters round-trip bit-exactly.
    """
    payload = _model_payload(model)
    payload["checksum"] = sha256_text(canonical_json(
        {k: payload[k] for k in ("architecture", "normalizer", "weights", "biases")}))
    with open(path, "w") as f:
        f.write(canonical_json(payload))
        f.write("\n")


def load_model(path) -> FnnModel:
    from .dataset import Normalizer

    with open(path) as f:
        payload = json.load(f)
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format {payload.get('format_version')}")
    expected = sha256_text(canonical_json(
        {k: payload[k] for k in ("architecture", "normalizer", "weights", "biases")}))
    if payload.get("checksum") != expected:
        raise ValueError(f"{path}: checksum mismatch, file is corrupt")

    arch = payload["architecture"]
    widths = tuple(arch["widths"])
    weights = [np.asarray(w, dtype=float) for w in payload["weights"]]
    biases = [np.asarray(b, dtype=float) for b in payload["biases"]]
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        if weights[i].shape != (a, b) or biases[i].shape != (b,):
            raise ValueError(f"{path}: layer {i} shape {weights[i].shape} does not match "
                             f"declared widths {widths}")

    norm = None
    if payload["normalizer"] is not None:
        norm = Normalizer(
            mean=np.asarray(payload["normalizer"]["mean"], dtype=float),
            std=np.asarray(payload["normalizer"]["std"], dtype=float),
            label_floor=float(payload["normalizer"]["label_floor"]),
            label_scale=float(payload["normalizer"]["label_scale"]),
        )
    model = FnnModel(widths=widths, negative_slope=arch["negative_slope"],
                     dropout=arch["dropout"], normalizer=norm, metadata=payload["metadata"])
    model.weights = weights
    model.biases = biases
    return model
