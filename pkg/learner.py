"""
Learner - Feed-forward classifier with dropout, written directly in numpy

Supplies every model-derived quantity the acquisition strategies need:
probabilities, MC-dropout probability tensors, penultimate embeddings,
output-layer gradient embeddings, input gradients and an optional
loss-prediction head.

Weights are stored as (fan_in, fan_out) matrices; a forward pass is
``h_{l+1} = act(h_l @ W_l + b_l)`` for hidden layers and plain logits for the
last layer. Dropout uses inverted scaling on hidden activations only, so
deterministic mode needs no rescale.
"""

import io
import json
import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import log_softmax, softmax

from config import defaults
from errors import FormatError, InvalidConfigError, InvalidInputError, ShapeError
from experiment_config import LearnerConfig

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"ALSN"
SNAPSHOT_VERSION = 1

_FLAG_STANDARDIZE = 1
_FLAG_LOSS_HEAD = 2
_FLAG_TANH = 4


# ============================================================
# DATA TYPES
# ============================================================

@dataclass(frozen=True)
class LossHeadParams:
    """Loss-prediction head: one small FC block per hidden layer, then a linear readout"""
    block_weights: Tuple[np.ndarray, ...]
    block_biases: Tuple[np.ndarray, ...]
    out_weight: np.ndarray
    out_bias: np.ndarray


@dataclass(frozen=True)
class LearnerSnapshot:
    """Trained parameters; immutable and safe to share between readers"""
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    config: LearnerConfig
    feature_mean: Optional[np.ndarray] = None
    feature_std: Optional[np.ndarray] = None
    loss_head: Optional[LossHeadParams] = None

    @property
    def layer_sizes(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    def with_params(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]) -> "LearnerSnapshot":
        """Copy with replaced classifier parameters"""
        return replace(self, weights=tuple(np.asarray(w, dtype=np.float64) for w in weights),
                       biases=tuple(np.asarray(b, dtype=np.float64) for b in biases))


@dataclass(frozen=True)
class McProbTensor:
    """T stochastic passes x n samples x k classes"""
    passes: np.ndarray

    def __post_init__(self):
        passes = np.asarray(self.passes, dtype=np.float64)
        if passes.ndim != 3:
            raise ShapeError(f"MC tensor must be T x n x k, got shape {passes.shape}")
        if np.any(passes < 0):
            raise InvalidInputError("MC probabilities must be non-negative")
        if passes.size and not np.allclose(passes.sum(axis=2), 1.0, rtol=0.0, atol=1e-6):
            raise InvalidInputError("every (pass, sample) row must sum to 1")
        object.__setattr__(self, "passes", passes)

    @property
    def n_passes(self) -> int:
        return self.passes.shape[0]

    def mean(self) -> np.ndarray:
        """Per-sample mean probability over the passes"""
        return self.passes.mean(axis=0)


# ============================================================
# OPTIMIZERS
# ============================================================

class SGDOptimizer:
    """Plain / momentum SGD"""

    def __init__(self, params: List[np.ndarray], learning_rate: float, momentum: float = 0.0):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]):
        for p, g, v in zip(params, grads, self.velocity):
            if self.momentum:
                v *= self.momentum
                v += g
                p -= self.learning_rate * v
            else:
                p -= self.learning_rate * g


class AdamOptimizer:
    """Adam with bias correction"""

    def __init__(self, params: List[np.ndarray], learning_rate: float,
                 beta1: float = defaults.ADAM_BETA1, beta2: float = defaults.ADAM_BETA2,
                 epsilon: float = defaults.ADAM_EPSILON):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]):
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.epsilon)


def _make_optimizer(cfg: LearnerConfig, params: List[np.ndarray]):
    if cfg.optimizer == "adam":
        return AdamOptimizer(params, cfg.learning_rate)
    return SGDOptimizer(params, cfg.learning_rate, cfg.momentum)


# ============================================================
# FORWARD / BACKWARD
# ============================================================

def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activation_grad(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return (z > 0.0).astype(np.float64)


def _standardize(snap: LearnerSnapshot, X: np.ndarray) -> np.ndarray:
    if snap.feature_mean is None:
        return X
    return (X - snap.feature_mean) / snap.feature_std


def _check_features(snap: LearnerSnapshot, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != snap.weights[0].shape[0]:
        raise ShapeError(
            f"expected feature width {snap.weights[0].shape[0]}, got shape {X.shape}")
    return X


def _forward(weights, biases, activation: str, Z0: np.ndarray, masks=None):
    """Returns (logits, activations, pre-activations); activations[0] is the input"""
    acts = [Z0]
    pre = []
    h = Z0
    for layer in range(len(weights) - 1):
        z = h @ weights[layer] + biases[layer]
        pre.append(z)
        h = _activate(z, activation)
        if masks is not None:
            h = h * masks[layer]
        acts.append(h)
    logits = h @ weights[-1] + biases[-1]
    return logits, acts, pre


def _backward(weights, activation: str, acts, pre, dlogits: np.ndarray,
              masks=None, extra_dacts=None):
    """
    Backpropagate dlogits (already scaled by sample weight / batch size)

    ``extra_dacts[l]`` is an additional gradient on the output of hidden
    layer l (used when the loss head co-trains the features).
    Returns (weight grads, bias grads, grad w.r.t. the network input).
    """
    n_layers = len(weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    grad_w[-1] = acts[-1].T @ dlogits
    grad_b[-1] = dlogits.sum(axis=0)
    dh = dlogits @ weights[-1].T
    for layer in range(n_layers - 2, -1, -1):
        if extra_dacts is not None and extra_dacts[layer] is not None:
            dh = dh + extra_dacts[layer]
        if masks is not None:
            dh = dh * masks[layer]
        dz = dh * _activation_grad(pre[layer], activation)
        grad_w[layer] = acts[layer].T @ dz
        grad_b[layer] = dz.sum(axis=0)
        dh = dz @ weights[layer].T
    return grad_w, grad_b, dh


def _one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(labels), k))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _dropout_masks(layer_sizes: List[int], n: int, rate: float, rng: np.random.Generator):
    if rate <= 0.0:
        return None
    keep = 1.0 - rate
    return [(rng.random((n, width)) >= rate) / keep for width in layer_sizes[1:-1]]


def _classifier_loss(weights, biases, cfg: LearnerConfig, Z: np.ndarray, labels: np.ndarray,
                     sample_weights: np.ndarray, masks=None):
    """Weighted mean cross-entropy plus L2; returns loss, grads and forward cache"""
    n = len(labels)
    logits, acts, pre = _forward(weights, biases, cfg.activation, Z, masks)
    log_p = log_softmax(logits, axis=1)
    per_sample = -log_p[np.arange(n), labels]
    loss = float(np.sum(sample_weights * per_sample) / n)
    dlogits = (np.exp(log_p) - _one_hot(labels, weights[-1].shape[1])) * (sample_weights / n)[:, None]
    if cfg.weight_decay:
        loss += 0.5 * cfg.weight_decay * sum(float(np.sum(w * w)) for w in weights)
    return loss, per_sample, dlogits, (logits, acts, pre)


# ============================================================
# LOSS-PREDICTION HEAD
# ============================================================

def ranking_loss(predicted: np.ndarray, target: np.ndarray, margin: float = defaults.LOSS_MARGIN):
    """
    Pairwise margin ranking loss on within-batch pairs (i, n-1-i)

    For each pair with target_i != target_j and s = sign(target_i - target_j)
    the pair contributes max(0, margin - s * (pred_i - pred_j)); pairs with
    equal targets contribute nothing. The loss is the mean over pairs.

    Returns:
        (loss, gradient w.r.t. predicted)
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    n = len(predicted)
    half = n // 2
    grad = np.zeros(n)
    if half == 0:
        return 0.0, grad
    first = np.arange(half)
    second = n - 1 - first
    sign = np.sign(target[first] - target[second])
    violation = margin - sign * (predicted[first] - predicted[second])
    active = (sign != 0) & (violation > 0)
    loss = float(np.sum(violation[active]) / half)
    np.add.at(grad, first[active], -sign[active] / half)
    np.add.at(grad, second[active], sign[active] / half)
    return loss, grad


def _head_inputs(acts: List[np.ndarray]) -> List[np.ndarray]:
    # hidden activations feed the head; a network without hidden layers feeds its input
    return acts[1:] if len(acts) > 1 else acts[:1]


def _init_head(input_widths: List[int], width: int, rng: np.random.Generator) -> LossHeadParams:
    block_w = tuple(rng.normal(0.0, np.sqrt(2.0 / w), size=(w, width)) for w in input_widths)
    block_b = tuple(np.zeros(width) for _ in input_widths)
    total = width * len(input_widths)
    out_w = rng.normal(0.0, np.sqrt(1.0 / total), size=(total,))
    return LossHeadParams(block_weights=block_w, block_biases=block_b,
                          out_weight=out_w, out_bias=np.zeros(1))


def _head_forward(head: LossHeadParams, inputs: List[np.ndarray]):
    pre = [x @ w + b for x, w, b in zip(inputs, head.block_weights, head.block_biases)]
    blocks = [np.maximum(z, 0.0) for z in pre]
    concat = np.concatenate(blocks, axis=1)
    pred = concat @ head.out_weight + head.out_bias[0]
    return pred, pre, concat


def _head_backward(head: LossHeadParams, inputs, pre, concat, dpred: np.ndarray):
    """Returns (param grads in head_param_list order, grads w.r.t. each input)"""
    width = head.block_weights[0].shape[1]
    g_out_w = concat.T @ dpred
    g_out_b = np.array([dpred.sum()])
    dconcat = np.outer(dpred, head.out_weight)
    g_block_w, g_block_b, d_inputs = [], [], []
    for i, (x, w, z) in enumerate(zip(inputs, head.block_weights, pre)):
        dz = dconcat[:, i * width:(i + 1) * width] * (z > 0.0)
        g_block_w.append(x.T @ dz)
        g_block_b.append(dz.sum(axis=0))
        d_inputs.append(dz @ w.T)
    return g_block_w + g_block_b + [g_out_w, g_out_b], d_inputs


def _head_param_list(head: LossHeadParams) -> List[np.ndarray]:
    return list(head.block_weights) + list(head.block_biases) + [head.out_weight, head.out_bias]


def _head_from_list(params: List[np.ndarray], n_blocks: int) -> LossHeadParams:
    return LossHeadParams(block_weights=tuple(params[:n_blocks]),
                          block_biases=tuple(params[n_blocks:2 * n_blocks]),
                          out_weight=params[2 * n_blocks], out_bias=params[2 * n_blocks + 1])


# ============================================================
# TRAINING
# ============================================================

def _seed_streams(cfg: LearnerConfig, seed: int, count: int) -> List[np.random.Generator]:
    entropy = [cfg.weight_init_seed & 0xFFFFFFFF, seed & 0xFFFFFFFF]
    return [np.random.default_rng(s) for s in np.random.SeedSequence(entropy).spawn(count)]


def _init_params(layer_sizes: List[int], activation: str, rng: np.random.Generator):
    gain = 2.0 if activation == "relu" else 1.0
    weights, biases = [], []
    for layer, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        scale = np.sqrt((gain if layer < len(layer_sizes) - 2 else 1.0) / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _validate_training_data(cfg: LearnerConfig, features, labels, sample_weights):
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise InvalidInputError("training set is empty")
    if len(X) != len(y):
        raise InvalidInputError(f"{len(X)} feature rows but {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("training features contain NaN or Inf")
    if cfg.layer_sizes is None:
        cfg = cfg.resolved(X.shape[1], max(2, int(y.max()) + 1))
    k = cfg.layer_sizes[-1]
    if y.min() < 0 or y.max() >= k:
        raise InvalidInputError(f"labels must be in 0..{k - 1}")
    if X.shape[1] != cfg.layer_sizes[0]:
        raise ShapeError(f"features have width {X.shape[1]}, network expects {cfg.layer_sizes[0]}")
    if sample_weights is None:
        w = np.ones(len(y))
    else:
        w = np.asarray(sample_weights, dtype=np.float64)
        if w.shape != (len(y),):
            raise ShapeError(f"sample_weights must have length {len(y)}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("sample_weights must be finite and non-negative")
    return cfg, X, y, w


def _fit(cfg: LearnerConfig, features, labels, sample_weights, seed: int,
         with_head: bool, stats_rows: Optional[int] = None) -> LearnerSnapshot:
    cfg, X, y, w = _validate_training_data(cfg, features, labels, sample_weights)
    init_rng, shuffle_rng, dropout_rng, head_rng = _seed_streams(cfg, seed, 4)

    mean = std = None
    if cfg.standardize:
        if stats_rows is not None and not 0 < stats_rows <= len(X):
            raise InvalidInputError(f"stats_rows must be in 1..{len(X)}, got {stats_rows}")
        basis = X if stats_rows is None else X[:stats_rows]
        mean = basis.mean(axis=0)
        std = basis.std(axis=0)
        std = np.where(std > 1e-12, std, 1.0)
    weights, biases = _init_params(cfg.layer_sizes, cfg.activation, init_rng)
    snap = LearnerSnapshot(weights=tuple(weights), biases=tuple(biases), config=cfg,
                           feature_mean=mean, feature_std=std)
    Z = _standardize(snap, X)

    head = None
    head_params: List[np.ndarray] = []
    head_opt = None
    if with_head:
        widths = cfg.layer_sizes[1:-1] or cfg.layer_sizes[:1]
        head = _init_head(widths, cfg.loss_head_width, head_rng)
        head_params = _head_param_list(head)
        head_opt = AdamOptimizer(head_params, cfg.loss_head_lr)

    params = weights + biases
    optimizer = _make_optimizer(cfg, params)
    n_layers = len(weights)
    n = len(y)

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size_train):
            idx = order[start:start + cfg.batch_size_train]
            masks = _dropout_masks(cfg.layer_sizes, len(idx), cfg.dropout_rate, dropout_rng)
            loss, per_sample, dlogits, (_, acts, pre) = _classifier_loss(
                weights, biases, cfg, Z[idx], y[idx], w[idx], masks)
            extra = None
            if head is not None:
                head = _head_from_list(head_params, len(head.block_weights))
                inputs = _head_inputs(acts)
                pred, head_pre, concat = _head_forward(head, inputs)
                rank_loss, dpred = ranking_loss(pred, per_sample, cfg.loss_margin)
                loss += cfg.loss_head_weight * rank_loss
                head_grads, d_inputs = _head_backward(head, inputs, head_pre, concat,
                                                      cfg.loss_head_weight * dpred)
                if n_layers > 1:
                    extra = d_inputs
                head_opt.step(head_params, head_grads)
            grad_w, grad_b, _ = _backward(weights, cfg.activation, acts, pre, dlogits, masks, extra)
            if cfg.weight_decay:
                grad_w = [g + cfg.weight_decay * wt for g, wt in zip(grad_w, weights)]
            optimizer.step(params, grad_w + grad_b)
            epoch_loss += loss * len(idx)
        logger.debug("epoch %d loss %.6f", epoch, epoch_loss / n)

    if head is not None:
        # classifier frozen: the head keeps learning on fixed deterministic features
        _, acts, _ = _forward(weights, biases, cfg.activation, Z)
        inputs_all = _head_inputs(acts)
        logits = acts[-1] @ weights[-1] + biases[-1]
        targets_all = -log_softmax(logits, axis=1)[np.arange(n), y]
        for epoch in range(cfg.loss_head_extra_epochs):
            order = shuffle_rng.permutation(n)
            for start in range(0, n, cfg.batch_size_train):
                idx = order[start:start + cfg.batch_size_train]
                head = _head_from_list(head_params, len(head.block_weights))
                inputs = [x[idx] for x in inputs_all]
                pred, head_pre, concat = _head_forward(head, inputs)
                _, dpred = ranking_loss(pred, targets_all[idx], cfg.loss_margin)
                head_grads, _ = _head_backward(head, inputs, head_pre, concat, dpred)
                head_opt.step(head_params, head_grads)
        head = _head_from_list(head_params, len(head.block_weights))

    return LearnerSnapshot(weights=tuple(weights), biases=tuple(biases), config=cfg,
                           feature_mean=mean, feature_std=std, loss_head=head)


def train(cfg: LearnerConfig, features, labels, sample_weights=None, seed: int = 0,
          stats_rows: Optional[int] = None) -> LearnerSnapshot:
    """
    Minimize weighted cross-entropy for cfg.epochs epochs from a seeded init

    Dropout is active during training. When cfg.loss_head is set the
    loss-prediction head is co-trained as in train_with_loss_head.
    ``stats_rows`` limits the standardization mean/std to the first rows
    (the truly labeled ones when pseudo-labeled rows follow).
    """
    return _fit(cfg, features, labels, sample_weights, seed, with_head=cfg.loss_head,
                stats_rows=stats_rows)


def train_with_loss_head(cfg: LearnerConfig, features, labels, seed: int = 0,
                         sample_weights=None, stats_rows: Optional[int] = None) -> LearnerSnapshot:
    """
    Co-train classifier and loss-prediction head, then train the head alone

    The head's target is the raw per-sample cross-entropy. After cfg.epochs
    co-training epochs the classifier is frozen and the head trains for
    cfg.loss_head_extra_epochs more.
    """
    if not cfg.loss_head:
        raise InvalidConfigError("train_with_loss_head needs learner.loss_head = true")
    return _fit(cfg, features, labels, sample_weights, seed, with_head=True,
                stats_rows=stats_rows)


# ============================================================
# INFERENCE
# ============================================================

def logits(snap: LearnerSnapshot, X) -> np.ndarray:
    X = _check_features(snap, X)
    out, _, _ = _forward(snap.weights, snap.biases, snap.config.activation, _standardize(snap, X))
    return out


def predict_proba(snap: LearnerSnapshot, X) -> np.ndarray:
    """Deterministic class probabilities, n x k"""
    return softmax(logits(snap, X), axis=1)


def predict(snap: LearnerSnapshot, X) -> np.ndarray:
    return np.argmax(logits(snap, X), axis=1)


def accuracy(snap: LearnerSnapshot, X, y) -> float:
    y = np.asarray(y)
    if len(y) == 0:
        return 0.0
    return float(np.mean(predict(snap, X) == y))


def mc_predict(snap: LearnerSnapshot, X, T: int = defaults.MC_PASSES, seed: int = 0) -> McProbTensor:
    """T stochastic passes, each with independent seeded dropout masks"""
    if T < 1:
        raise InvalidInputError(f"need at least one MC pass, got T={T}")
    X = _check_features(snap, X)
    Z = _standardize(snap, X)
    rng = np.random.default_rng(seed)
    cfg = snap.config
    passes = np.empty((T, len(X), snap.n_classes))
    for t in range(T):
        masks = _dropout_masks(snap.layer_sizes, len(X), cfg.dropout_rate, rng)
        out, _, _ = _forward(snap.weights, snap.biases, cfg.activation, Z, masks)
        passes[t] = softmax(out, axis=1)
    return McProbTensor(passes=passes)


def embed(snap: LearnerSnapshot, X) -> np.ndarray:
    """
    Post-activation penultimate-layer values in deterministic mode

    A network without hidden layers returns the raw inputs.
    """
    X = _check_features(snap, X)
    if snap.n_hidden == 0:
        return X.copy()
    _, acts, _ = _forward(snap.weights, snap.biases, snap.config.activation, _standardize(snap, X))
    return acts[-1]


def grad_embedding(snap: LearnerSnapshot, X) -> np.ndarray:
    """
    Gradient of the loss at the predicted label w.r.t. output-layer weights

    Row layout is class-major: entry [c * dim_h + j] = (p_c - [c == y_hat]) * h_j,
    where h is what the output layer consumes.
    """
    X = _check_features(snap, X)
    out, acts, _ = _forward(snap.weights, snap.biases, snap.config.activation, _standardize(snap, X))
    p = softmax(out, axis=1)
    y_hat = np.argmax(p, axis=1)
    residual = p - _one_hot(y_hat, snap.n_classes)
    h = acts[-1]
    return (residual[:, :, None] * h[:, None, :]).reshape(len(X), -1)


def input_gradients(snap: LearnerSnapshot, X, targets) -> np.ndarray:
    """Per-row gradient of cross-entropy at ``targets`` w.r.t. the raw input"""
    X = _check_features(snap, X)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if len(targets) != len(X):
        raise ShapeError(f"{len(targets)} targets for {len(X)} rows")
    if targets.size and (targets.min() < 0 or targets.max() >= snap.n_classes):
        raise InvalidInputError(f"target class must be < {snap.n_classes}")
    cfg = snap.config
    out, acts, pre = _forward(snap.weights, snap.biases, cfg.activation, _standardize(snap, X))
    dlogits = softmax(out, axis=1) - _one_hot(targets, snap.n_classes)
    _, _, d_input = _backward(snap.weights, cfg.activation, acts, pre, dlogits)
    if snap.feature_std is not None:
        d_input = d_input / snap.feature_std
    return d_input


def input_gradient(snap: LearnerSnapshot, x, target: int) -> np.ndarray:
    """Gradient of cross-entropy at class ``target`` w.r.t. the input vector"""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return input_gradients(snap, x.reshape(1, -1), [target])[0]


def predict_loss(snap: LearnerSnapshot, X) -> np.ndarray:
    """Per-sample loss predicted by the head"""
    if snap.loss_head is None:
        raise InvalidConfigError("snapshot has no loss-prediction head")
    X = _check_features(snap, X)
    _, acts, _ = _forward(snap.weights, snap.biases, snap.config.activation, _standardize(snap, X))
    pred, _, _ = _head_forward(snap.loss_head, _head_inputs(acts))
    return pred


def loss_and_gradients(snap: LearnerSnapshot, X, labels, sample_weights=None):
    """
    Deterministic training loss and its gradients for every classifier parameter

    Returns:
        (loss, weight grads, bias grads)
    """
    X = _check_features(snap, X)
    y = np.asarray(labels, dtype=np.int64)
    w = np.ones(len(y)) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    cfg = snap.config
    loss, _, dlogits, (_, acts, pre) = _classifier_loss(
        snap.weights, snap.biases, cfg, _standardize(snap, X), y, w)
    grad_w, grad_b, _ = _backward(snap.weights, cfg.activation, acts, pre, dlogits)
    if cfg.weight_decay:
        grad_w = [g + cfg.weight_decay * wt for g, wt in zip(grad_w, snap.weights)]
    return loss, grad_w, grad_b


# ============================================================
# SERIALIZATION
# ============================================================

def _write_array(buf: io.BytesIO, array: np.ndarray):
    buf.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def save_snapshot(snap: LearnerSnapshot, path: Union[str, Path]):
    """
    Write the versioned little-endian ALSN file

    Layout: magic, u32 version, u32 flags, u32 layer count L, L+1 u32 widths,
    per layer W (row-major f8) then b; mean/std if standardized; head tensors
    if present; finally a u32-length-prefixed JSON learner config.
    """
    flags = 0
    if snap.feature_mean is not None:
        flags |= _FLAG_STANDARDIZE
    if snap.loss_head is not None:
        flags |= _FLAG_LOSS_HEAD
    if snap.config.activation == "tanh":
        flags |= _FLAG_TANH
    sizes = snap.layer_sizes
    buf = io.BytesIO()
    buf.write(SNAPSHOT_MAGIC)
    buf.write(struct.pack("<III", SNAPSHOT_VERSION, flags, len(snap.weights)))
    buf.write(struct.pack(f"<{len(sizes)}I", *sizes))
    for w, b in zip(snap.weights, snap.biases):
        _write_array(buf, w)
        _write_array(buf, b)
    if snap.feature_mean is not None:
        _write_array(buf, snap.feature_mean)
        _write_array(buf, snap.feature_std)
    if snap.loss_head is not None:
        head = snap.loss_head
        buf.write(struct.pack("<II", len(head.block_weights), head.block_weights[0].shape[1]))
        for w in head.block_weights:
            buf.write(struct.pack("<I", w.shape[0]))
        for w, b in zip(head.block_weights, head.block_biases):
            _write_array(buf, w)
            _write_array(buf, b)
        _write_array(buf, head.out_weight)
        _write_array(buf, head.out_bias)
    config_bytes = json.dumps(snap.config.model_dump(mode="json"), sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(config_bytes)))
    buf.write(config_bytes)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(buf.getvalue())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise FormatError("snapshot file is truncated")
        chunk = self.data[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def u32(self, count: int = 1):
        values = struct.unpack(f"<{count}I", self.take(4 * count))
        return values if count > 1 else values[0]

    def array(self, *shape: int) -> np.ndarray:
        size = int(np.prod(shape))
        return np.frombuffer(self.take(8 * size), dtype="<f8").astype(np.float64).reshape(shape)


def load_snapshot(path: Union[str, Path]) -> LearnerSnapshot:
    """Read a snapshot written by save_snapshot"""
    reader = _Reader(Path(path).read_bytes())
    if reader.take(4) != SNAPSHOT_MAGIC:
        raise FormatError(f"{path} is not a learner snapshot (bad magic)")
    version = reader.u32()
    if version != SNAPSHOT_VERSION:
        raise FormatError(f"unsupported snapshot version {version}")
    flags = reader.u32()
    n_layers = reader.u32()
    sizes = list(struct.unpack(f"<{n_layers + 1}I", reader.take(4 * (n_layers + 1))))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(reader.array(fan_in, fan_out))
        biases.append(reader.array(fan_out))
    mean = std = None
    if flags & _FLAG_STANDARDIZE:
        mean = reader.array(sizes[0])
        std = reader.array(sizes[0])
    head = None
    if flags & _FLAG_LOSS_HEAD:
        n_blocks = reader.u32()
        width = reader.u32()
        in_widths = [reader.u32() for _ in range(n_blocks)]
        block_w, block_b = [], []
        for in_width in in_widths:
            block_w.append(reader.array(in_width, width))
            block_b.append(reader.array(width))
        out_w = reader.array(width * n_blocks)
        out_b = reader.array(1)
        head = LossHeadParams(block_weights=tuple(block_w), block_biases=tuple(block_b),
                              out_weight=out_w, out_bias=out_b)
    config_len = reader.u32()
    try:
        cfg = LearnerConfig.model_validate(json.loads(reader.take(config_len).decode("utf-8")))
    except ValueError as exc:
        raise FormatError(f"snapshot config block is unreadable: {exc}") from None
    if cfg.layer_sizes != sizes:
        raise FormatError(f"snapshot layer widths {sizes} disagree with its config {cfg.layer_sizes}")
    return LearnerSnapshot(weights=tuple(weights), biases=tuple(biases), config=cfg,
                           feature_mean=mean, feature_std=std, loss_head=head)
