"""Independent brute-force oracles."""

import numpy as np


def simplex_grid_min(M, step=1e-3, refine=1e-5):
    """Minimize ``lam^T M lam`` over the 3-simplex by exhaustive grid search,
    then re-scan a neighbourhood of the best grid point at ``refine``."""
    n = int(round(1 / step))
    a, b = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = a + b <= n
    L = np.stack([a[keep], b[keep], n - a[keep] - b[keep]], axis=1) / n
    vals = np.einsum("ij,jk,ik->i", L, M, L)
    best = L[np.argmin(vals)]
    span = 2 * step
    m = int(round(span / refine))
    off = np.arange(-m, m + 1) * refine
    da, db = np.meshgrid(off, off, indexing="ij")
    l0 = best[0] + da.ravel()
    l1 = best[1] + db.ravel()
    l2 = 1 - l0 - l1
    ok = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
    L2 = np.stack([l0[ok], l1[ok], l2[ok]], axis=1)
    vals2 = np.einsum("ij,jk,ik->i", L2, M, L2)
    return float(min(vals.min(), vals2.min()))
