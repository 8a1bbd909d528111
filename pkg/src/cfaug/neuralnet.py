"""Single-hidden-layer softmax classifier trained by plain SGD.

Shared by the base classifier and the pairwise labeler.  Dropout is
inverted (surviving hidden units scaled by 1/(1-p) at sample time), so
a dropout-off forward pass is the plain network.  Training, inference
and MC-dropout sampling are all deterministic under fixed seeds.

Single-input ``forward`` is the reference path; ``pack``/"packed"
helpers carry the same math vectorized over rows for throughput.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractError, TrainingDivergedError
from .features import SparseVector
from .rngs import derive_rng

REL_ERROR_FLOOR = 1e-8  # below this, gradients are compared absolutely


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden_dim: int = 64
    n_classes: int = 2
    dropout_rate: float = 0.5

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.hidden_dim < 1 or self.n_classes < 2:
            raise ConfigError("model dimensions must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must be in [0, 1)")


@dataclass
class Model:
    config: ModelConfig
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def copy(self) -> "Model":
        return Model(self.config, self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())


def with_dropout(model: Model, dropout_rate: float) -> Model:
    """Same weights under a different dropout rate (shared arrays).

    Used to take an MC-dropout posterior of a model at a scoring rate
    different from its training rate."""
    from dataclasses import replace as _replace

    return Model(_replace(model.config, dropout_rate=dropout_rate),
                 model.W1, model.b1, model.W2, model.b2)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int
    epochs: int
    seed: int
    weight_decay: float = 0.0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be positive")
        if not 0.0 <= self.weight_decay < 1.0:
            raise ConfigError("weight_decay must be in [0, 1)")


@dataclass
class TrainResult:
    model: Model
    epoch_losses: list[float] = field(default_factory=list)


def init_model(config: ModelConfig, seed: int) -> Model:
    """Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = derive_rng(seed, "init")
    a1 = np.sqrt(6.0 / (config.input_dim + config.hidden_dim))
    a2 = np.sqrt(6.0 / (config.hidden_dim + config.n_classes))
    return Model(
        config=config,
        W1=rng.uniform(-a1, a1, size=(config.hidden_dim, config.input_dim)),
        b1=np.zeros(config.hidden_dim),
        W2=rng.uniform(-a2, a2, size=(config.n_classes, config.hidden_dim)),
        b2=np.zeros(config.n_classes),
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sample_mask(rng, shape: tuple[int, ...], dropout_rate: float) -> np.ndarray:
    """Inverted-dropout mask: 1/(1-p) with probability 1-p, else 0."""
    if dropout_rate == 0.0:
        return np.ones(shape)
    keep = 1.0 - dropout_rate
    return (rng.random(shape) < keep) / keep


def _check_input(model: Model, x: SparseVector) -> None:
    if x.dimension != model.config.input_dim:
        raise ContractError(
            f"input dimension {x.dimension} != model input_dim {model.config.input_dim}"
        )


def hidden_activations(model: Model, x: SparseVector, rng=None) -> np.ndarray:
    """Post-ReLU (and post-dropout, when rng is given) hidden layer."""
    _check_input(model, x)
    z1 = model.W1[:, x.indices] @ x.values + model.b1
    a1 = np.maximum(z1, 0.0)
    if rng is not None:
        a1 = a1 * sample_mask(rng, a1.shape, model.config.dropout_rate)
    return a1


def forward(model: Model, x: SparseVector, rng=None) -> np.ndarray:
    """Class probabilities; rng=None runs with dropout off (deterministic)."""
    a1 = hidden_activations(model, x, rng)
    return _softmax(model.W2 @ a1 + model.b2)


def mc_predict(model: Model, x: SparseVector, T: int, rng) -> list[np.ndarray]:
    """T forward passes, each under an independent dropout mask."""
    if T < 1:
        raise ContractError("T must be >= 1")
    return [forward(model, x, rng) for _ in range(T)]


def cross_entropy(probs: np.ndarray, label: int) -> float:
    return float(-np.log(probs[label]))


# ---------------------------------------------------------------------------
# packed (row-padded) representation for batched training and scoring

@dataclass
class Packed:
    idx: np.ndarray  # (n, m) int64, padded with 0
    val: np.ndarray  # (n, m) float64, padded with 0.0
    dimension: int

    def __len__(self) -> int:
        return len(self.idx)


def pack(vectors: Sequence[SparseVector]) -> Packed:
    if not vectors:
        raise ContractError("cannot pack an empty vector list")
    dim = vectors[0].dimension
    if any(v.dimension != dim for v in vectors):
        raise ContractError("all packed vectors must share a dimension")
    m = max(1, max(len(v.indices) for v in vectors))
    idx = np.zeros((len(vectors), m), dtype=np.int64)
    val = np.zeros((len(vectors), m))
    for i, v in enumerate(vectors):
        idx[i, : len(v.indices)] = v.indices
        val[i, : len(v.values)] = v.values
    return Packed(idx, val, dim)


def _hidden_batch(model: Model, idx: np.ndarray, val: np.ndarray) -> np.ndarray:
    # z1[b, h] = sum_m W1[h, idx[b, m]] * val[b, m] + b1[h]
    z1 = np.matmul(val[:, None, :], model.W1.T[idx])[:, 0, :] + model.b1
    return np.maximum(z1, 0.0)


def forward_packed(model: Model, packed: Packed, masks: np.ndarray | None = None) -> np.ndarray:
    """Probabilities for every packed row; masks (n, hidden) applies dropout."""
    if packed.dimension != model.config.input_dim:
        raise ContractError("packed dimension mismatch")
    a1 = _hidden_batch(model, packed.idx, packed.val)
    if masks is not None:
        a1 = a1 * masks
    return _softmax(a1 @ model.W2.T + model.b2)


def mc_probs_packed(model: Model, packed: Packed, T: int, seeds: Sequence[int]) -> np.ndarray:
    """(n, T, n_classes) MC-dropout probabilities, one mask stream per row.

    Row i's masks come from seeds[i] alone, so scores are independent of
    pool ordering.
    """
    if T < 1:
        raise ContractError("T must be >= 1")
    if len(seeds) != len(packed):
        raise ContractError("one seed per packed row required")
    h = model.config.hidden_dim
    a1 = _hidden_batch(model, packed.idx, packed.val)  # (n, h)
    masks = np.empty((len(packed), T, h))
    for i, s in enumerate(seeds):
        masks[i] = sample_mask(derive_rng(s, "mc"), (T, h), model.config.dropout_rate)
    a1d = a1[:, None, :] * masks
    z2 = np.einsum("bth,ch->btc", a1d, model.W2, optimize=True) + model.b2
    return _softmax(z2)


def train(
    model: Model,
    data: Sequence[tuple[SparseVector, int]],
    tc: TrainConfig,
) -> TrainResult:
    """Mini-batch SGD on mean cross-entropy with per-example dropout.

    L2 weight decay (when configured) applies to W1 and W2 each step;
    the W1 decay is carried lazily in a scale factor so steps stay
    O(touched columns).
    """
    if not data:
        raise ContractError("cannot train on an empty dataset")
    labels = np.array([y for _, y in data], dtype=np.int64)
    if np.any((labels < 0) | (labels >= model.config.n_classes)):
        raise ContractError("labels must index a class")
    packed = pack([x for x, _ in data])
    if packed.dimension != model.config.input_dim:
        raise ContractError("training data dimension mismatch")

    out = model.copy()
    rng = derive_rng(tc.seed, "train")
    n = len(data)
    losses = []
    dim = model.config.input_dim
    # (D+1, H) transposed weights; packed pad entries (value 0) are
    # re-pointed at the scratch row D so scatter writes cannot clobber a
    # real gradient at feature index 0
    w1t = np.vstack([out.W1.T, np.zeros((1, model.config.hidden_dim))])
    idx_all = np.where(packed.val == 0.0, dim, packed.idx)
    state = _SgdState()
    for _ in range(tc.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, tc.batch_size):
            rows = order[start : start + tc.batch_size]
            epoch_loss += (
                _sgd_step(out, w1t, state, idx_all, packed.val, labels, rows, tc, rng)
                * len(rows)
            )
        losses.append(epoch_loss / n)
        if not np.isfinite(losses[-1]):
            raise TrainingDivergedError(f"non-finite training loss {losses[-1]}")
    out.W1 = np.ascontiguousarray((state.w1_scale * w1t[:dim]).T)
    return TrainResult(out, losses)


class _SgdState:
    __slots__ = ("w1_scale",)

    def __init__(self) -> None:
        self.w1_scale = 1.0


def _sgd_step(model, w1t, state, idx_all, val_all, labels, rows, tc, rng) -> float:
    lr = tc.learning_rate
    idx = idx_all[rows]
    val = val_all[rows]
    y = labels[rows]
    b = len(rows)
    s = state.w1_scale

    z1 = np.matmul(val[:, None, :], w1t[idx])[:, 0, :]
    if s != 1.0:
        z1 *= s
    z1 += model.b1
    a1 = np.maximum(z1, 0.0)
    masks = sample_mask(rng, a1.shape, model.config.dropout_rate)
    a1d = a1 * masks
    probs = _softmax(a1d @ model.W2.T + model.b2)
    loss = float(-np.mean(np.log(probs[np.arange(b), y])))

    dz2 = probs.copy()
    dz2[np.arange(b), y] -= 1.0
    dz2 /= b
    gW2 = dz2.T @ a1d
    gb2 = dz2.sum(axis=0)
    dz1 = (dz2 @ model.W2) * masks * (z1 > 0.0)

    if tc.weight_decay:
        # W_eff' = (1 - lr*wd) W_eff - lr g, carried as scale * raw
        s = s * (1.0 - lr * tc.weight_decay)
        state.w1_scale = s
        model.W2 -= lr * (gW2 + tc.weight_decay * model.W2)
    else:
        model.W2 -= lr * gW2

    # per-row scatter: within a row, real indices are unique and pads all
    # point at the scratch row, so fancy-index subtraction is exact
    scaled = ((lr / s) * val)[:, :, None] * dz1[:, None, :] if s != 1.0 else (
        (lr * val)[:, :, None] * dz1[:, None, :]
    )
    for i in range(b):
        w1t[idx[i]] -= scaled[i]
    model.b1 -= lr * dz1.sum(axis=0)
    model.b2 -= lr * gb2
    return loss


# ---------------------------------------------------------------------------
# gradient verification

def _loss_and_grads(model: Model, x: SparseVector, label: int):
    z1 = model.W1[:, x.indices] @ x.values + model.b1
    a1 = np.maximum(z1, 0.0)
    probs = _softmax(model.W2 @ a1 + model.b2)
    loss = cross_entropy(probs, label)
    dz2 = probs.copy()
    dz2[label] -= 1.0
    gW2 = np.outer(dz2, a1)
    gb2 = dz2
    dz1 = (model.W2.T @ dz2) * (z1 > 0.0)
    gW1 = np.zeros_like(model.W1)
    gW1[:, x.indices] = np.outer(dz1, x.values)
    gb1 = dz1
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def finite_diff_check(model: Model, x: SparseVector, label: int, epsilon: float = 1e-5) -> float:
    """Max discrepancy between analytic and central-difference gradients.

    Relative error per parameter, falling back to absolute error when
    both gradients are below REL_ERROR_FLOOR (dead units).
    """
    if not 0.0 < epsilon <= 1e-2:
        raise ContractError("epsilon must be in (0, 1e-2]")
    _check_input(model, x)
    _, grads = _loss_and_grads(model, x, label)
    worst = 0.0
    m = model.copy()
    for name in ("W1", "b1", "W2", "b2"):
        param = getattr(m, name)
        analytic = grads[name]
        flat = param.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            lp, _ = _loss_and_grads(m, x, label)
            flat[i] = orig - epsilon
            lm, _ = _loss_and_grads(m, x, label)
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * epsilon)
            denom = max(abs(aflat[i]), abs(numeric))
            if denom < REL_ERROR_FLOOR:
                err = abs(aflat[i] - numeric)
            else:
                err = abs(aflat[i] - numeric) / denom
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# evaluation helpers

def predict_labels(model: Model, packed: Packed) -> np.ndarray:
    """Dropout-off argmax labels, ties broken toward the lower class."""
    probs = forward_packed(model, packed)
    best = probs.max(axis=1, keepdims=True)
    return (probs < best).argmin(axis=1)


def error_rate_packed(model: Model, packed: Packed, labels: np.ndarray) -> float:
    if len(packed) == 0:
        raise ContractError("empty evaluation set")
    return float(np.mean(predict_labels(model, packed) != labels))
