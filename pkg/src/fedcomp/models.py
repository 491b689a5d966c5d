"""Flat-parameter differentiable models with manually derived gradients.

Two small softmax classifiers are provided: multinomial logistic regression
and a one-hidden-layer ReLU MLP. All parameters live in a single flat
float64 vector (row-major weight matrices followed by bias vectors, layer
by layer) so the compression and aggregation code can treat every model as
one array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOGISTIC = "logistic-regression"
MLP = "mlp-1h"
MODEL_KINDS = (LOGISTIC, MLP)


@dataclass(frozen=True)
class ModelSpec:
    """Architecture descriptor; the parameter count follows from the fields."""

    kind: str
    input_dim: int
    num_classes: int
    hidden_dim: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1 or self.num_classes < 1:
            raise ValueError("input_dim and num_classes must be >= 1")
        if self.kind == MLP and self.hidden_dim < 1:
            raise ValueError(f"{MLP} requires hidden_dim >= 1")

    @property
    def param_count(self) -> int:
        return sum(self.layer_lengths())

    def layer_lengths(self) -> tuple[int, ...]:
        """Lengths of the flat parameter segments (weights then bias, per layer)."""
        if self.kind == LOGISTIC:
            return (self.input_dim * self.num_classes, self.num_classes)
        return (
            self.input_dim * self.hidden_dim,
            self.hidden_dim,
            self.hidden_dim * self.num_classes,
            self.num_classes,
        )


@dataclass(frozen=True)
class Batch:
    """A non-empty block of samples: features (rows) and integer class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D (samples x dims) matrix")
        if labels.ndim != 1 or labels.shape[0] != feats.shape[0]:
            raise ValueError("labels must be 1-D and align with feature rows")
        if feats.shape[0] < 1:
            raise ValueError("batch must contain at least one sample")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Seeded uniform(-0.05, 0.05) initialization of the flat parameter vector."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.05, 0.05, size=spec.param_count)


def _check_inputs(params: np.ndarray, spec: ModelSpec, batch: Batch) -> None:
    if params.shape != (spec.param_count,):
        raise ValueError(
            f"params length {params.shape} does not match spec ({spec.param_count},)"
        )
    if batch.features.shape[1] != spec.input_dim:
        raise ValueError(
            f"feature dim {batch.features.shape[1]} does not match spec {spec.input_dim}"
        )
    if batch.labels.size and (
        batch.labels.min() < 0 or batch.labels.max() >= spec.num_classes
    ):
        raise ValueError("labels out of range for spec.num_classes")


def _views(params: np.ndarray, spec: ModelSpec):
    """Reshape the flat vector into per-layer weight/bias views (no copies)."""
    if spec.kind == LOGISTIC:
        d, c = spec.input_dim, spec.num_classes
        return params[: d * c].reshape(d, c), params[d * c :]
    d, h, c = spec.input_dim, spec.hidden_dim, spec.num_classes
    o = d * h
    w1 = params[:o].reshape(d, h)
    b1 = params[o : o + h]
    o += h
    w2 = params[o : o + h * c].reshape(h, c)
    b2 = params[o + h * c :]
    return w1, b1, w2, b2


def _forward(params: np.ndarray, spec: ModelSpec, features: np.ndarray):
    """Returns (logits, hidden pre-activation or None, hidden activation or None)."""
    if spec.kind == LOGISTIC:
        w, b = _views(params, spec)
        return features @ w + b, None, None
    w1, b1, w2, b2 = _views(params, spec)
    pre = features @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    return hidden @ w2 + b2, pre, hidden


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def forward_loss(params: np.ndarray, spec: ModelSpec, batch: Batch) -> float:
    """Mean softmax cross-entropy of the batch under the given parameters."""
    _check_inputs(params, spec, batch)
    logits, _, _ = _forward(params, spec, batch.features)
    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(len(batch)), batch.labels].mean())
    if not math.isfinite(loss):
        raise FloatingPointError("non-finite loss")
    return loss


def gradient(params: np.ndarray, spec: ModelSpec, batch: Batch) -> np.ndarray:
    """Gradient of forward_loss with respect to the flat parameter vector."""
    _check_inputs(params, spec, batch)
    x, y = batch.features, batch.labels
    m = len(batch)
    logits, pre, hidden = _forward(params, spec, x)
    dlogits = np.exp(_log_softmax(logits))
    dlogits[np.arange(m), y] -= 1.0
    dlogits /= m
    if spec.kind == LOGISTIC:
        out = np.concatenate([(x.T @ dlogits).ravel(), dlogits.sum(axis=0)])
    else:
        _, _, w2, _ = _views(params, spec)
        dhidden = (dlogits @ w2.T) * (pre > 0.0)
        out = np.concatenate(
            [
                (x.T @ dhidden).ravel(),
                dhidden.sum(axis=0),
                (hidden.T @ dlogits).ravel(),
                dlogits.sum(axis=0),
            ]
        )
    if not np.isfinite(out).all():
        raise FloatingPointError("non-finite gradient")
    return out


def sgd_step(params: np.ndarray, grad: np.ndarray, alpha: float) -> np.ndarray:
    """One gradient-descent step: params - alpha * grad, elementwise."""
    if params.shape != grad.shape:
        raise ValueError("params and grad lengths differ")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return params - alpha * grad


def local_train(
    params: np.ndarray,
    spec: ModelSpec,
    data: Batch,
    epochs: int,
    batch_size: int,
    alpha: float,
    seed: int,
) -> np.ndarray:
    """Seeded minibatch SGD over the dataset; pure function of its arguments.

    Each epoch shuffles the sample order with the seeded generator and applies
    one sgd_step per minibatch (the final minibatch of an epoch may be short).
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    _check_inputs(params, spec, data)
    rng = np.random.default_rng(seed)
    w = np.array(params, dtype=np.float64, copy=True)
    n = len(data)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            minibatch = Batch(data.features[idx], data.labels[idx])
            w = sgd_step(w, gradient(w, spec, minibatch), alpha)
    return w


def evaluate(params: np.ndarray, spec: ModelSpec, data: Batch) -> tuple[float, float]:
    """(accuracy, loss) on the dataset; argmax ties go to the lowest class index."""
    _check_inputs(params, spec, data)
    logits, _, _ = _forward(params, spec, data.features)
    preds = logits.argmax(axis=1)
    accuracy = float((preds == data.labels).mean())
    return accuracy, forward_loss(params, spec, data)
