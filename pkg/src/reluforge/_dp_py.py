"""Pure-Python fallbacks for the compiled kernels."""

from __future__ import annotations

import math

import numpy as np


def interval_costs(P0, P1, P2, t, j: int) -> np.ndarray:
    """Best-line squared error on [t[p], t[j]] for every p < j."""
    s0 = P0[j] - P0[:j]
    s1 = P1[j] - P1[:j]
    s2 = P2[j] - P2[:j]
    ell = t[j] - t[:j]
    s1c = s1 - 0.5 * (t[j] + t[:j]) * s0
    return np.maximum(s2 - s0 * s0 / ell - 12.0 * s1c * s1c / (ell * ell * ell), 0.0)


def segmented_dp(P0, P1, P2, t, n: int):
    """Table D[r, j] of the best r-piece error on cells [0, j) and the argmin knots."""
    G = t.shape[0] - 1
    D = np.full((n + 1, G + 1), np.inf)
    A = np.full((n + 1, G + 1), -1, dtype=np.int64)
    D[0, 0] = 0.0
    for j in range(1, G + 1):
        e = interval_costs(P0, P1, P2, t, j)
        for r in range(1, min(n, j) + 1):
            cand = D[r - 1, :j] + e
            p = int(np.argmin(cand))
            # strict comparison in the compiled kernel keeps the first minimizer too
            D[r, j] = cand[p]
            A[r, j] = p
    return D, A


def simplify_nodes(t, v, tol: float) -> np.ndarray:
    """Greedy slope-cone simplification: indices of the nodes to keep.

    Every dropped node lies within ``tol`` of the chord between the kept nodes
    around it.
    """
    t = np.asarray(t, dtype=np.float64).tolist()
    v = np.asarray(v, dtype=np.float64).tolist()
    n = len(t)
    keep = [0]
    a = 0
    lo, hi = -math.inf, math.inf
    j = 1
    while j < n:
        dt = t[j] - t[a]
        s = (v[j] - v[a]) / dt
        if lo <= s <= hi:
            lo = max(lo, (v[j] - tol - v[a]) / dt)
            hi = min(hi, (v[j] + tol - v[a]) / dt)
            j += 1
            continue
        a = j - 1
        keep.append(a)
        lo, hi = -math.inf, math.inf
    if n > 1 and keep[-1] != n - 1:
        keep.append(n - 1)
    return np.asarray(keep, dtype=np.intp)
