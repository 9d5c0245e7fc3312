"""Independent reference implementations used by the tests.

They follow the signal models literally (explicit linear maps, dense
covariances, exhaustive search) and share no code with the package.
"""

import itertools

import numpy as np


def pilot_map(phi, p, M):
    """Matrix ``A`` with ``vec(Y) = A h`` for ``Y = sqrt(p) h phi^T`` (column-major vec)."""
    tau = phi.size
    A = np.zeros((M * tau, M), dtype=complex)
    for m in range(M):
        e = np.zeros(M)
        e[m] = 1.0
        Y = np.sqrt(p) * np.outer(e, phi)
        A[:, m] = Y.flatten(order="F")
    return A


def conditional_mean(y, target, phis, ps, Rs, sigma2):
    """``E{h_target | y}`` and its covariance for jointly Gaussian ``(h, y)``."""
    M = Rs[0].shape[0]
    maps = [pilot_map(phi, p, M) for phi, p in zip(phis, ps)]
    Cyy = sum(A @ R @ A.conj().T for A, R in zip(maps, Rs)) + sigma2 * np.eye(y.size)
    Chy = Rs[target] @ maps[target].conj().T
    h_hat = Chy @ np.linalg.solve(Cyy, y)
    Phi = Chy @ np.linalg.solve(Cyy, Chy.conj().T)
    return h_hat, Phi


def random_instance(rng, M, n_ue, tau, *, orthogonal=False):
    """Random correlations, powers and pilots (orthogonal round-robin or random)."""
    Rs = []
    for _ in range(n_ue):
        r = rng.integers(1, M + 1)
        X = rng.standard_normal((M, r)) + 1j * rng.standard_normal((M, r))
        R = X @ X.conj().T / r
        Rs.append(R * rng.uniform(0.2, 2.0) / (np.trace(R).real / M))
    ps = rng.uniform(0.5, 2.0, n_ue)
    if orthogonal:
        F = np.exp(-2j * np.pi * np.outer(np.arange(tau), np.arange(tau)) / tau)
        phis = F[rng.integers(0, tau, n_ue)]
    else:
        phis = np.exp(2j * np.pi * rng.random((n_ue, tau)))
    return np.array(Rs), ps, phis


def simulate_observation(rng, phis, ps, Rs, sigma2):
    M, tau = Rs.shape[-1], phis.shape[-1]
    Y = np.sqrt(sigma2 / 2) * (rng.standard_normal((M, tau)) + 1j * rng.standard_normal((M, tau)))
    for phi, p, R in zip(phis, ps, Rs):
        lam, V = np.linalg.eigh(R)
        h = V @ (np.sqrt(np.clip(lam, 0, None))
                 * (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / np.sqrt(2))
        Y += np.sqrt(p) * np.outer(h, phi)
    return Y


def max_generalized_rayleigh(a, B):
    """``max_v |v^H a|^2 / v^H B v`` by the generalized eigenproblem."""
    from scipy.linalg import eigh

    return float(eigh(np.outer(a, a.conj()), B, eigvals_only=True)[-1])


def kron_block(u, C):
    """``(u u^H) kron C`` assembled block by block."""
    N, M = u.size, C.shape[0]
    out = np.zeros((N * M, N * M), dtype=complex)
    for n in range(N):
        for q in range(N):
            out[n * M:(n + 1) * M, q * M:(q + 1) * M] = u[n] * np.conj(u[q]) * C
    return out


def brute_assignment_cost(cost):
    n = cost.shape[0]
    return min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def brute_balanced_partition(D, N):
    """Minimum of ``sum_k D[label_k, k]`` over labelings with exactly ``N`` UEs per group."""
    G, K = D.shape
    best = np.inf
    for perm in itertools.permutations(range(K)):
        labels = np.empty(K, dtype=int)
        labels[list(perm)] = np.arange(K) // N
        best = min(best, D[labels, np.arange(K)].sum())
    return best
