"""Feed-forward classifier over a flat parameter vector.

Layout of the parameter vector, layer by layer: the weight matrix of shape
``(fan_in, fan_out)`` in row-major order, followed by the bias of length
``fan_out``. A spec with two layer sizes is plain multinomial logistic
regression.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import losses as L
from .exceptions import ConfigurationError

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class ModelSpec:
    layer_sizes: tuple
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ConfigurationError(
                "layer_sizes needs at least two positive entries")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    @property
    def n_features(self):
        return self.layer_sizes[0]

    @property
    def n_params(self):
        s = self.layer_sizes
        return sum(a * b + b for a, b in zip(s[:-1], s[1:]))

    def slices(self):
        """``(weight_slice, bias_slice, fan_in, fan_out)`` for every layer."""
        out = []
        offset = 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = slice(offset, offset + fan_in * fan_out)
            offset += fan_in * fan_out
            b = slice(offset, offset + fan_out)
            offset += fan_out
            out.append((w, b, fan_in, fan_out))
        return out


@dataclass(frozen=True)
class Batch:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        y = np.asarray(self.labels, dtype=np.intp).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ConfigurationError("features and labels differ in length")
        if np.any(y < 0):
            raise ConfigurationError("negative label")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx):
        return Batch(self.features[idx], self.labels[idx])

    @staticmethod
    def concat(batches):
        batches = list(batches)
        return Batch(np.concatenate([b.features for b in batches]),
                     np.concatenate([b.labels for b in batches]))


def init_params(spec):
    """Glorot-uniform weights, zero biases, seeded by ``spec.init_seed``."""
    rng = np.random.default_rng(spec.init_seed)
    w = np.zeros(spec.n_params)
    for ws, _, fan_in, fan_out in spec.slices():
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        w[ws] = rng.uniform(-bound, bound, size=fan_in * fan_out)
    return w


def unpack(w, spec):
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (spec.n_params,):
        raise ConfigurationError(
            f"parameter vector has length {w.shape}, expected {spec.n_params}")
    return [(w[ws].reshape(fan_in, fan_out), w[bs])
            for ws, bs, fan_in, fan_out in spec.slices()]


def _act(a, kind):
    return np.maximum(a, 0.0) if kind == "relu" else np.tanh(a)


def _act_grad(a, h, kind):
    return (a > 0).astype(np.float64) if kind == "relu" else 1.0 - h * h


def _forward(w, spec, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.n_features:
        raise ConfigurationError(
            f"feature dimension {X.shape[1]} != {spec.n_features}")
    layers = unpack(w, spec)
    pre, post = [], [X]
    h = X
    for i, (W, b) in enumerate(layers):
        a = h @ W + b
        if i < len(layers) - 1:
            pre.append(a)
            h = _act(a, spec.activation)
            post.append(h)
        else:
            h = a
    return h, pre, post, layers


def logits(w, spec, batch):
    X = batch.features if isinstance(batch, Batch) else batch
    return _forward(w, spec, X)[0]


def predict(w, spec, X):
    """Argmax class; ties resolved to the smallest class index."""
    return np.argmax(logits(w, spec, X), axis=1)


def loss_value(w, spec, batch, loss=L.CE):
    """Forward-only loss evaluation (what clients send during line search)."""
    return L.loss_value_from_logits(logits(w, spec, batch), batch.labels, loss)


def loss_and_grad(w, spec, batch, loss=L.CE):
    """Mean batch loss and its exact gradient w.r.t. the flat parameters."""
    if len(batch) == 0:
        raise ConfigurationError("empty batch")
    Z, pre, post, layers = _forward(w, spec, batch.features)
    value, delta = L.loss_from_logits(Z, batch.labels, loss)
    grad = np.empty(spec.n_params)
    slices = spec.slices()
    for i in range(len(layers) - 1, -1, -1):
        ws, bs, _, _ = slices[i]
        grad[ws] = (post[i].T @ delta).ravel()
        grad[bs] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ layers[i][0].T) * _act_grad(
                pre[i - 1], post[i], spec.activation)
    return value, grad
