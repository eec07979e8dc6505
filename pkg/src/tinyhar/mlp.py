"""Micro feedforward network trained with AdaBelief.

The deployed network applies the rectifier on every layer including the
output (cheap on the target instruction set); the training loss applies
softmax cross-entropy to the pre-rectifier logits instead, which leaves
the argmax unchanged for non-negative logits while keeping gradients
well-behaved.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DimMismatch,
    InvalidDims,
    NonFiniteLoss,
    SingleClass,
)
from .features import MANIFEST_VERSION, DEFAULT_MA_WIDTH, FeatureMask

DEFAULT_DIMS = (78, 64, 32, 24)


@dataclass
class MlpModel:
    dims: Tuple[int, ...]
    weights: List[np.ndarray]  # per layer, shape (out, in)
    biases: List[np.ndarray]  # per layer, shape (out,)
    feature_mask: FeatureMask
    class_names: Tuple[str, ...] = ()
    manifest_version: int = MANIFEST_VERSION
    ma_width: int = DEFAULT_MA_WIDTH

    @property
    def n_params(self) -> int:
        return sum((i + 1) * o for i, o in zip(self.dims[:-1], self.dims[1:]))

    @property
    def n_classes(self) -> int:
        return self.dims[-1]


def mlp_init(
    dims: Sequence[int] = DEFAULT_DIMS,
    seed: int = 0,
    feature_mask: Optional[FeatureMask] = None,
    class_names: Tuple[str, ...] = (),
) -> MlpModel:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise InvalidDims(f"bad layer widths {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    if feature_mask is None:
        feature_mask = FeatureMask(tuple(range(dims[0])))
    return MlpModel(dims, weights, biases, feature_mask, class_names)


def _logits(m: MlpModel, x: np.ndarray, training: bool, dropout: float, rng):
    """Forward pass up to the pre-rectifier output logits.

    Returns (logits, cache) where the cache holds per-layer activations
    and dropout masks for backprop.
    """
    a = x
    acts = [a]
    masks = []
    for l, (W, b) in enumerate(zip(m.weights, m.biases)):
        z = a @ W.T + b
        if l < len(m.weights) - 1:
            a = np.maximum(z, 0.0)
            if training and dropout > 0:
                keep = rng.random(a.shape) >= dropout
                a = a * keep / (1.0 - dropout)
                masks.append(keep)
            else:
                masks.append(None)
        else:
            a = z
        acts.append(a)
    return a, (acts, masks)


def mlp_forward(
    m: MlpModel,
    fv,
    training: bool = False,
    dropout_rng=None,
    dropout: float = 0.0,
) -> np.ndarray:
    """Class scores (rectified output logits) for one feature vector."""
    fv = np.asarray(fv, dtype=float)
    if fv.shape[-1] != m.dims[0]:
        raise DimMismatch(f"expected {m.dims[0]} inputs, got {fv.shape[-1]}")
    if training and dropout > 0 and dropout_rng is None:
        dropout_rng = np.random.default_rng(0)
    z, _ = _logits(m, fv, training, dropout, dropout_rng)
    return np.maximum(z, 0.0)


def mlp_predict(m: MlpModel, fv) -> int:
    """Predicted class index; ties break to the lowest index."""
    scores = mlp_forward(m, fv)
    return int(np.argmax(scores, axis=-1)) if scores.ndim == 1 else np.argmax(scores, axis=-1)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grads(
    m: MlpModel,
    X: np.ndarray,
    y: np.ndarray,
    training: bool = False,
    dropout: float = 0.0,
    rng=None,
) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """Mean softmax cross-entropy and analytic gradients."""
    n = len(X)
    z, (acts, masks) = _logits(m, X, training, dropout, rng)
    p = _softmax(z)
    eps = 1e-12
    loss = float(-np.mean(np.log(p[np.arange(n), y] + eps)))

    delta = p.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n

    gW = [np.empty(0)] * len(m.weights)
    gb = [np.empty(0)] * len(m.biases)
    for l in reversed(range(len(m.weights))):
        a_prev = acts[l]
        gW[l] = delta.T @ a_prev
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ m.weights[l]
            if masks[l - 1] is not None:
                delta = delta * masks[l - 1] / (1.0 - dropout)
            delta = delta * (acts[l] > 0)
    return loss, gW, gb


@dataclass
class AdaBeliefState:
    m: List[np.ndarray]
    s: List[np.ndarray]
    t: int = 0


def adabelief_step(
    params: List[np.ndarray],
    grads: List[np.ndarray],
    state: AdaBeliefState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place AdaBelief update.

    First moment follows momentum; the second moment tracks the squared
    deviation of the gradient from the first moment, both bias-corrected.
    """
    state.t += 1
    t = state.t
    for p, g, m, s in zip(params, grads, state.m, state.s):
        m *= beta1
        m += (1 - beta1) * g
        s *= beta2
        s += (1 - beta2) * (g - m) ** 2
        m_hat = m / (1 - beta1**t)
        s_hat = s / (1 - beta2**t)
        p -= lr * m_hat / (np.sqrt(s_hat) + eps)


@dataclass(frozen=True)
class TrainConfig:
    initial_lr: float = 3e-4
    lr_decay: float = 0.5
    lr_decay_every: int = 50  # epochs
    batch_size: int = 1024
    patience: int = 30
    dropout: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.initial_lr < 0:
            raise InvalidDims("learning rate must be >= 0")
        if not 0 <= self.dropout < 1:
            raise InvalidDims("dropout must be in [0, 1)")
        if self.patience < 1:
            raise InvalidDims("patience must be >= 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float


def _accuracy(m: MlpModel, X: np.ndarray, y: np.ndarray) -> float:
    pred = np.argmax(mlp_forward(m, X), axis=-1)
    return float(np.mean(pred == y))


def mlp_train(
    train: Tuple[np.ndarray, np.ndarray],
    val: Tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig = TrainConfig(),
    dims: Optional[Sequence[int]] = None,
    feature_mask: Optional[FeatureMask] = None,
    class_names: Tuple[str, ...] = (),
) -> Tuple[MlpModel, List[EpochRecord]]:
    """Mini-batch AdaBelief training with early stopping on val accuracy.

    Returns the best-validation-accuracy snapshot and the epoch history.
    """
    X, y = np.asarray(train[0], float), np.asarray(train[1])
    Xv, yv = np.asarray(val[0], float), np.asarray(val[1])
    n_classes = int(max(y.max(), yv.max() if len(yv) else 0)) + 1
    if len(np.unique(y)) < 2:
        raise SingleClass("training set needs at least two classes")
    if dims is None:
        dims = (X.shape[1], 64, 32, max(n_classes, 2))
    model = mlp_init(dims, cfg.seed, feature_mask, class_names)

    rng = np.random.default_rng(cfg.seed + 1)
    drop_rng = np.random.default_rng(cfg.seed + 2)
    params = model.weights + model.biases
    state = AdaBeliefState(
        [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params]
    )

    best_acc = -np.inf
    best = None
    stall = 0
    history: List[EpochRecord] = []
    for epoch in range(1, cfg.max_epochs + 1):
        lr = cfg.initial_lr * cfg.lr_decay ** ((epoch - 1) // cfg.lr_decay_every)
        order = rng.permutation(len(X))
        losses = []
        for start in range(0, len(X), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, gW, gb = loss_and_grads(
                model, X[batch], y[batch], True, cfg.dropout, drop_rng
            )
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss diverged at epoch {epoch}")
            adabelief_step(
                params, gW + gb, state, lr, cfg.beta1, cfg.beta2, cfg.eps
            )
            losses.append(loss)
        val_acc = _accuracy(model, Xv, yv)
        history.append(EpochRecord(epoch, float(np.mean(losses)), val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best = (
                [w.copy() for w in model.weights],
                [b.copy() for b in model.biases],
            )
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break
    if best is not None:
        model.weights, model.biases = best
    # Deployment stores 32-bit floats; round now so the serialized model
    # predicts identically to the in-memory one.
    model.weights = [w.astype(np.float32).astype(float) for w in model.weights]
    model.biases = [b.astype(np.float32).astype(float) for b in model.biases]
    return model, history
