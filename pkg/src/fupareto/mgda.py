"""Min-norm point in the convex hull of a set of gradients.

The simplex QP ``min 1/2 lam^T M lam`` with ``M = G^T G`` is solved with
Wolfe's min-norm-point method: Frank-Wolfe vertex selection on the Gram
matrix, followed by exact affine minimization over the active vertex set
with line-segment clipping back into the simplex. It terminates in finitely
many steps with an exact solution, which plain Frank-Wolfe does not when the
column norms differ by orders of magnitude.
"""

from dataclasses import dataclass

import numpy as np

from . import numkit
from .exceptions import ConfigurationError, NumericError

STATIONARY_RTOL = 1e-6


@dataclass(frozen=True)
class MgdaResult:
    weights: np.ndarray
    direction: np.ndarray
    direction_norm: float
    stationary: bool
    iterations: int = 0
    gap: float = 0.0


def _affine_minimizer(M, S):
    # min mu^T M_SS mu  s.t.  sum(mu) = 1, via the KKT system
    k = len(S)
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = M[np.ix_(S, S)]
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:k]


def solve_simplex_qp(M, tol=1e-10, max_iter=1000, trace=None):
    """Minimize ``1/2 lam^T M lam`` over the probability simplex.

    Parameters
    ----------
    M : (k, k) array
        Symmetric positive semidefinite matrix.
    tol : float
        Stop once the Frank-Wolfe gap ``lam^T M lam - min_i (M lam)_i`` is
        below ``tol * max(1, max_i M_ii)``.
    max_iter : int
        Cap on major (vertex-adding) iterations.
    trace : list, optional
        If given, the objective value after every update is appended.

    Returns
    -------
    lam, iterations, gap
    """
    M = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise NumericError("non-finite Gram entries")
    k = M.shape[0]
    if k == 1:
        return np.ones(1), 0, 0.0
    scale = max(1.0, float(np.max(np.diag(M))))
    lam = np.zeros(k)
    first = int(np.argmin(np.diag(M)))
    lam[first] = 1.0
    S = [first]

    def record():
        if trace is not None:
            trace.append(0.5 * float(lam @ M @ lam))

    record()
    it = 0
    while True:
        Ml = M @ lam
        gap = float(lam @ Ml - Ml.min())
        j = int(np.argmin(Ml))
        if gap <= tol * scale or j in S or it >= max_iter:
            break
        it += 1
        S.append(j)
        for _ in range(k + 1):
            mu = _affine_minimizer(M, S)
            if np.all(mu > 1e-15):
                lam[:] = 0.0
                lam[S] = mu
                record()
                break
            cur = lam[S]
            neg = mu <= 1e-15
            theta = min(1.0, float(np.min(cur[neg] / (cur[neg] - mu[neg]))))
            new = cur + theta * (mu - cur)
            new[new <= 1e-15] = 0.0
            lam[:] = 0.0
            lam[S] = new
            S = [i for i in S if lam[i] > 0]
            record()
    lam = np.maximum(lam, 0.0)
    lam /= lam.sum()
    Ml = M @ lam
    return lam, it, float(lam @ Ml - Ml.min())


def min_norm(G, tol=1e-10, max_iter=1000):
    """Common descent direction ``G lam*`` for the columns of ``G``."""
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    G = numkit.as_columns(G)
    M = numkit.gram(G)
    lam, it, gap = solve_simplex_qp(M, tol, max_iter)
    d = numkit.combine(G, lam)
    d_norm = numkit.norm(d)
    max_col = float(np.sqrt(np.max(np.diag(M))))
    stationary = d_norm <= STATIONARY_RTOL * max_col
    return MgdaResult(lam, d, d_norm, bool(stationary), it, gap)


def descent_violations(G, d):
    """Indices of columns whose inner product with ``d`` is materially negative."""
    G = numkit.as_columns(G)
    d = numkit.as_vector(d)
    d_norm = numkit.norm(d)
    bad = []
    for i in range(G.shape[1]):
        g = G[:, i]
        if numkit.dot(g, d) < -1e-12 * numkit.norm(g) * d_norm:
            bad.append(i)
    return bad


def is_common_descent(G, d):
    """True when ``d`` (a step subtracted from the parameters) opposes no column."""
    return not descent_violations(G, d)
