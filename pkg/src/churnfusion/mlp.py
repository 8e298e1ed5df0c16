"""Small feed-forward network shared by the emotion and churn models.

ReLU hidden layers, logistic output, binary cross-entropy with optional
L2 penalty, trained by seeded mini-batch gradient descent. Kept in plain
numpy so analytic gradients can be checked against finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: int = 64
    l2_penalty: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be non-negative")


@dataclass
class MLPParams:
    """Layer dimensions plus per-layer weight matrices and bias vectors."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray] = field(repr=False, default_factory=list)
    biases: list[np.ndarray] = field(repr=False, default_factory=list)

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.weights) != len(self.layer_dims) - 1:
            raise ValueError("one weight matrix per layer transition required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != expect or b.shape != (expect[1],):
                raise ValueError(f"layer {i} shapes inconsistent with layer_dims")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"non-finite parameters in layer {i}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def copy(self) -> "MLPParams":
        return MLPParams(
            self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_params(layer_dims, seed: int) -> MLPParams:
    """He-style initialization, deterministic per seed.

    Hidden biases start slightly positive so no unit sits exactly on the
    ReLU kink at initialization (zero biases put fully-inactive samples at
    pre-activation 0, where finite differences and the subgradient
    convention disagree).
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    transitions = list(zip(layer_dims[:-1], layer_dims[1:]))
    for i, (d_in, d_out) in enumerate(transitions):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out)))
        biases.append(np.zeros(d_out) if i == len(transitions) - 1 else np.full(d_out, 0.01))
    return MLPParams(tuple(layer_dims), weights, biases)


def forward(params: MLPParams, X: np.ndarray) -> np.ndarray:
    """Probability of class 1 for each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.input_dim:
        raise ShapeMismatch(f"input width {X.shape[1]} != model width {params.input_dim}")
    a = X
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.maximum(0.0, a @ w + b)
    z = a @ params.weights[-1] + params.biases[-1]
    return sigmoid(z[:, 0])


def loss_and_grads(params: MLPParams, X: np.ndarray, y: np.ndarray, l2_penalty: float = 0.0):
    """Mean cross-entropy plus L2 penalty, with analytic gradients."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]

    activations = [X]
    a = X
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.maximum(0.0, a @ w + b)
        activations.append(a)
    z = a @ params.weights[-1] + params.biases[-1]
    p = sigmoid(z[:, 0])

    # log-loss via logaddexp keeps saturated probabilities finite
    zf = z[:, 0]
    ce = np.mean(np.logaddexp(0.0, zf) - y * zf)
    loss = ce + 0.5 * l2_penalty * sum(float(np.sum(w**2)) for w in params.weights)

    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    delta = ((p - y) / n)[:, None]
    for layer in range(len(params.weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta + l2_penalty * params.weights[layer]
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer].T) * (activations[layer] > 0)
    return loss, grads_w, grads_b


def train(
    X: np.ndarray, y: np.ndarray, hidden_dims: tuple[int, ...], cfg: TrainConfig
) -> tuple[MLPParams, float]:
    """Fit by mini-batch gradient descent; returns (params, final full-batch loss)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    dims = (X.shape[1],) + tuple(hidden_dims) + (1,)
    params = init_params(dims, cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1)
    n = X.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            _, gw, gb = loss_and_grads(params, X[batch], y[batch], cfg.l2_penalty)
            for layer in range(len(params.weights)):
                params.weights[layer] -= cfg.learning_rate * gw[layer]
                params.biases[layer] -= cfg.learning_rate * gb[layer]
    final_loss, _, _ = loss_and_grads(params, X, y, cfg.l2_penalty)
    return params, float(final_loss)


def flatten_params(params: MLPParams) -> np.ndarray:
    return np.concatenate([a.ravel() for pair in zip(params.weights, params.biases) for a in pair])


def unflatten_params(vector: np.ndarray, layer_dims) -> MLPParams:
    weights, biases = [], []
    offset = 0
    for d_in, d_out in zip(layer_dims[:-1], layer_dims[1:]):
        weights.append(vector[offset : offset + d_in * d_out].reshape(d_in, d_out).copy())
        offset += d_in * d_out
        biases.append(vector[offset : offset + d_out].copy())
        offset += d_out
    return MLPParams(tuple(layer_dims), weights, biases)


def numerical_gradient(params: MLPParams, X, y, l2_penalty: float = 0.0, h: float = 1e-6):
    """Central finite differences of the loss over all parameters."""
    theta = flatten_params(params)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        bump = np.zeros_like(theta)
        bump[i] = h
        lo, _, _ = loss_and_grads(unflatten_params(theta - bump, params.layer_dims), X, y, l2_penalty)
        hi, _, _ = loss_and_grads(unflatten_params(theta + bump, params.layer_dims), X, y, l2_penalty)
        grad[i] = (hi - lo) / (2 * h)
    return grad


def pack_params(params: MLPParams) -> bytes:
    """Little-endian blob: n_layers u16, dims u32..., float64 weights/biases."""
    parts = [struct.pack("<H", len(params.layer_dims))]
    parts.append(struct.pack(f"<{len(params.layer_dims)}I", *params.layer_dims))
    for w, b in zip(params.weights, params.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def unpack_params(blob: bytes, offset: int = 0) -> tuple[MLPParams, int]:
    (n_layers,) = struct.unpack_from("<H", blob, offset)
    offset += 2
    dims = struct.unpack_from(f"<{n_layers}I", blob, offset)
    offset += 4 * n_layers
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(blob, dtype="<f8", count=d_in * d_out, offset=offset).reshape(d_in, d_out)
        offset += 8 * d_in * d_out
        b = np.frombuffer(blob, dtype="<f8", count=d_out, offset=offset)
        offset += 8 * d_out
        weights.append(w.copy())
        biases.append(b.copy())
    return MLPParams(dims, weights, biases), offset
