"""Null-space projection and the post-training anchor direction."""

import numpy as np

from . import numkit
from .exceptions import DegenerateAnchorError, EmptyBasisError


def orthonormal_basis(vectors, drop_tol=1e-8):
    """Modified Gram-Schmidt basis of the column span of ``vectors``.

    A candidate is dropped when its residual norm falls below
    ``drop_tol`` times its original norm. Each candidate is orthogonalized
    twice, which keeps ``B^T B = I`` to machine precision.

    Returns an ``(n, r)`` array; raises :class:`EmptyBasisError` when
    ``r`` would be zero.
    """
    V = numkit.as_columns(vectors)
    basis = []
    for j in range(V.shape[1]):
        v = V[:, j].copy()
        original = numkit.norm(v)
        if original == 0.0:
            continue
        for _ in range(2):
            for q in basis:
                v -= numkit.dot(q, v) * q
        r = numkit.norm(v)
        if r < drop_tol * original:
            continue
        basis.append(v / r)
    if not basis:
        raise EmptyBasisError("all columns are numerically zero or dependent")
    return np.stack(basis, axis=1)


def project_null(g_u, basis):
    """Remove from ``g_u`` its component inside ``span(basis)``."""
    g = numkit.as_vector(g_u).copy()
    B = numkit.as_columns(basis)
    for _ in range(2):
        for j in range(B.shape[1]):
            q = B[:, j]
            g -= numkit.dot(q, g) * q
    return g


def anchor_direction(w_t, w_0):
    """Unit vector pointing from the anchor ``w_0`` to ``w_t``."""
    diff = numkit.as_vector(w_t) - numkit.as_vector(w_0)
    dist = numkit.norm(diff)
    if dist <= 1e-12:
        raise DegenerateAnchorError("current model coincides with the anchor")
    return diff / dist
