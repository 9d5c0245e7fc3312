"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same three functions with the same semantics;
``cdnoma.kernels`` picks one at import time.
"""

import math

import numpy as np


def onering_lags_2d(sin_nodes, weights, n_lags):
    """``out[d] = sum_a w_a exp(j pi d sin_a)`` for ``d = 0 .. n_lags-1``."""
    sin_nodes = np.asarray(sin_nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    d = np.arange(n_lags)
    return np.exp(1j * np.pi * np.outer(d, sin_nodes)) @ weights


def onering_lags_3d(sin_theta, cos_theta, w_theta, sin_phi, w_phi, side):
    """Lag table of the planar-array correlation.

    ``out[dr + side - 1, dc + side - 1] = sum_b sum_a w_b w_a
    exp(j pi (dr sin(theta_b) + dc cos(theta_b) sin(phi_a)))`` for
    ``|dr|, |dc| < side``.
    """
    sin_theta = np.asarray(sin_theta, dtype=float)
    cos_theta = np.asarray(cos_theta, dtype=float)
    w_theta = np.asarray(w_theta, dtype=float)
    sin_phi = np.asarray(sin_phi, dtype=float)
    w_phi = np.asarray(w_phi, dtype=float)
    lags = np.arange(-(side - 1), side)
    # horizontal part per elevation node: (n_theta, n_lags)
    hor = np.exp(1j * np.pi * lags[None, :, None]
                 * (cos_theta[:, None, None] * sin_phi[None, None, :])) @ w_phi
    ver = np.exp(1j * np.pi * np.outer(lags, sin_theta)) * w_theta  # (n_lags, n_theta)
    return ver @ hor


def linear_assignment(cost):
    """Minimum-cost assignment of rows to distinct columns.

    Shortest augmenting path with dual potentials (Jonker-Volgenant
    flavour of the Hungarian method). ``cost`` is ``n x m`` with
    ``n <= m``; returns the column assigned to each row.
    """
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    if n > m:
        raise ValueError("cost matrix must have at least as many columns as rows")
    c = cost.tolist()
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[col] = row (1-based), 0 = free
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = c[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    out = np.empty(n, dtype=np.intp)
    for j in range(1, m + 1):
        if p[j]:
            out[p[j] - 1] = j - 1
    return out
