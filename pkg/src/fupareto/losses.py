"""Scalar objectives: cross-entropy, MBS, UCE, KL-to-uniform and the
fairness-guidance angle.

Every per-batch loss is the mean over samples. The ``*_from_logits``
functions additionally return the gradient with respect to the logits,
which :mod:`fupareto.model` backpropagates through the network.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import numkit
from .exceptions import ConfigurationError, DegenerateLossError

PROB_FLOOR = 1e-12
LOG_PROB_FLOOR = math.log(PROB_FLOOR)
ARCCOS_CLAMP = 1e-9
LOSS_KINDS = ("CE", "MBS", "UCE", "KLUniform")


@dataclass(frozen=True)
class LossSpec:
    kind: str = "CE"
    delta: float = 1e-3

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigurationError(f"unknown loss kind {self.kind!r}")
        if not self.delta > 0:
            raise ConfigurationError("delta must be positive")


CE = LossSpec("CE")
MBS = LossSpec("MBS")


def _check_labels(labels, C):
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise ConfigurationError("label out of range")
    return labels.astype(np.intp)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


# -- probability-space definitions -------------------------------------------

def ce(probabilities, labels):
    P = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    y = _check_labels(labels, P.shape[1])
    p_true = np.maximum(P[np.arange(len(y)), y], PROB_FLOOR)
    return float(np.mean(-np.log(p_true)))


def uce(probabilities, labels):
    """Unlearning cross-entropy: mean of ``-log(1 - p_true)``."""
    P = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    y = _check_labels(labels, P.shape[1])
    rest = np.maximum(1.0 - P[np.arange(len(y)), y], PROB_FLOOR)
    return float(np.mean(-np.log(rest)))


def kl_uniform(probabilities):
    """Mean ``KL(p || uniform) = ln C - H(p)``, with ``0 log 0 = 0``."""
    P = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    C = P.shape[1]
    plogp = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    return float(np.mean(math.log(C) + plogp.sum(axis=1)))


def runner_up(logits, labels):
    """Index of the largest non-target logit; ties go to the smallest index."""
    masked = np.array(logits, dtype=np.float64, copy=True)
    masked[np.arange(len(labels)), labels] = -np.inf
    return np.argmax(masked, axis=1)


def mbs_per_sample(logits, labels, delta=1e-3):
    Z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = _check_labels(labels, Z.shape[1])
    nxt = runner_up(Z, y)
    rows = np.arange(len(y))
    return np.maximum(Z[rows, y] - Z[rows, nxt] - delta, 0.0)


def mbs(logit_row, label, delta=1e-3):
    """Boundary-shift loss of a single sample."""
    row = np.asarray(logit_row, dtype=np.float64)
    if row.shape[-1] < 2:
        raise ConfigurationError("MBS needs at least two classes")
    return float(mbs_per_sample(row[None, :], [label], delta)[0])


# -- logit-space losses with gradients ---------------------------------------

def _ce_from_logits(Z, y):
    B = len(y)
    rows = np.arange(B)
    logp = log_softmax(Z)[rows, y]
    clamped = logp < LOG_PROB_FLOOR
    value = float(np.mean(-np.maximum(logp, LOG_PROB_FLOOR)))
    dZ = softmax(Z)
    dZ[rows, y] -= 1.0
    dZ[clamped] = 0.0
    return value, dZ / B


def _mbs_from_logits(Z, y, delta):
    B = len(y)
    rows = np.arange(B)
    nxt = runner_up(Z, y)
    margin = Z[rows, y] - Z[rows, nxt] - delta
    active = margin > 0  # subgradient 0 at the kink
    value = float(np.mean(np.where(active, margin, 0.0)))
    dZ = np.zeros_like(Z)
    dZ[rows[active], y[active]] = 1.0
    dZ[rows[active], nxt[active]] = -1.0
    return value, dZ / B


def _uce_from_logits(Z, y):
    B = len(y)
    rows = np.arange(B)
    P = softmax(Z)
    other = P.copy()
    other[rows, y] = 0.0
    rest = other.sum(axis=1)
    live = rest >= PROB_FLOOR
    value = float(np.mean(-np.log(np.maximum(rest, PROB_FLOOR))))
    # d/dz_k -log(1-p_c) = p_c * (delta_kc - p_k) / (1 - p_c)
    p_c = P[rows, y]
    safe_rest = np.where(live, rest, 1.0)
    dZ = -p_c[:, None] * other / safe_rest[:, None]
    dZ[rows, y] = p_c
    dZ[~live] = 0.0
    return value, dZ / B


def _kl_from_logits(Z):
    B, C = Z.shape
    logp = log_softmax(Z)
    P = np.exp(logp)
    neg_entropy = (P * logp).sum(axis=1)
    value = float(np.mean(math.log(C) + neg_entropy))
    dZ = P * (logp - neg_entropy[:, None])
    return value, dZ / B


def loss_from_logits(logits, labels, spec=CE):
    """Mean loss over the batch and its gradient w.r.t. the logits."""
    Z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = _check_labels(labels, Z.shape[1])
    if len(y) == 0:
        raise ConfigurationError("empty batch")
    if spec.kind == "CE":
        return _ce_from_logits(Z, y)
    if spec.kind == "MBS":
        return _mbs_from_logits(Z, y, spec.delta)
    if spec.kind == "UCE":
        return _uce_from_logits(Z, y)
    return _kl_from_logits(Z)


def loss_value_from_logits(logits, labels, spec=CE):
    return loss_from_logits(logits, labels, spec)[0]


# -- fairness-guidance objective ---------------------------------------------

def _fairness_parts(F, p):
    F = numkit.as_vector(F)
    p = numkit.as_vector(p)
    if F.shape != p.shape:
        raise ConfigurationError("loss and preference vectors differ in length")
    F_norm = numkit.norm(F)
    if F_norm == 0.0:
        raise DegenerateLossError("loss vector has zero norm")
    p_norm = numkit.norm(p)
    if p_norm == 0.0:
        raise ConfigurationError("preference vector must have a nonzero entry")
    p_hat = p / p_norm
    pF = numkit.dot(p_hat, F)
    u = min(max(pF / F_norm, -1.0 + ARCCOS_CLAMP), 1.0 - ARCCOS_CLAMP)
    return F, F_norm, p_hat, pF, u


def fairness_value(F, p):
    """Angle between the loss vector ``F`` and the preference direction ``p``."""
    return math.acos(_fairness_parts(F, p)[4])


def fairness_loss_weights(F, p):
    """Partial derivatives of the fairness angle w.r.t. each client loss."""
    F, F_norm, p_hat, pF, u = _fairness_parts(F, p)
    scale = -1.0 / math.sqrt(1.0 - u * u)
    return scale * (p_hat / F_norm - pF * F / F_norm**3)


def fairness_grad(F, p, client_grads):
    """Chain-rule gradient of the fairness angle w.r.t. the parameters."""
    G = numkit.as_columns(client_grads)
    w = fairness_loss_weights(F, p)
    if G.shape[1] != w.shape[0]:
        raise ConfigurationError(
            f"{G.shape[1]} client gradients for {w.shape[0]} losses")
    return numkit.combine(G, w)
