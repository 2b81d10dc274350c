"""Flat-vector linear algebra shared by the optimization modules.

All reductions go through :func:`math.fsum`, which returns the correctly
rounded sum of its inputs. The result therefore does not depend on
summation order, chunking or thread count, which is what makes runs
bitwise reproducible.
"""

import math

import numpy as np

from .exceptions import ConfigurationError, NumericError


def as_vector(values):
    """Return ``values`` as a contiguous 1-D float64 array."""
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ConfigurationError(f"expected a flat vector, got shape {v.shape}")
    return v


def as_columns(columns):
    """Stack a sequence of equal-length vectors into an ``(n, k)`` matrix."""
    if isinstance(columns, np.ndarray) and columns.ndim == 2:
        return np.asarray(columns, dtype=np.float64)
    cols = [as_vector(c) for c in columns]
    if not cols:
        raise ConfigurationError("gradient matrix needs at least one column")
    n = cols[0].shape[0]
    for c in cols:
        if c.shape[0] != n:
            raise ConfigurationError(
                f"column dimension mismatch: {c.shape[0]} != {n}")
    return np.stack(cols, axis=1)


def _check_same_length(a, b):
    if a.shape != b.shape:
        raise ConfigurationError(
            f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def dot(a, b):
    a = as_vector(a)
    b = as_vector(b)
    _check_same_length(a, b)
    return math.fsum(a * b)


def norm(a):
    return math.sqrt(dot(a, a))


def axpy(alpha, x, y):
    """Return ``y + alpha * x`` as a new array."""
    x = as_vector(x)
    y = as_vector(y)
    _check_same_length(x, y)
    return y + float(alpha) * x


def gram(G):
    """Pairwise inner products of the columns of ``G``.

    Only the upper triangle is computed; the lower one is mirrored, so the
    result is exactly symmetric.
    """
    G = as_columns(G)
    k = G.shape[1]
    M = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            M[i, j] = M[j, i] = math.fsum(G[:, i] * G[:, j])
    if not np.all(np.isfinite(M)):
        raise NumericError("non-finite entry in Gram matrix")
    return M


def combine(G, weights):
    """Return ``G @ weights`` with each coordinate summed by ``fsum``."""
    G = as_columns(G)
    w = as_vector(weights)
    if w.shape[0] != G.shape[1]:
        raise ConfigurationError(
            f"{w.shape[0]} weights for {G.shape[1]} columns")
    if G.shape[1] == 1:
        return G[:, 0] * w[0]
    terms = G * w[None, :]
    return np.array([math.fsum(row) for row in terms])


def check_finite(v, what="vector"):
    if not np.all(np.isfinite(v)):
        raise NumericError(f"non-finite values in {what}")
    return v
