"""UE grouping from spatial correlation matrices.

UEs are represented by the dominant eigenspace of their correlation
matrix and compared with the chordal distance. Groups come from a k-means
pass on the Grassmann manifold, optionally balanced to exactly ``N``
members each by solving an assignment problem against the group centers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .netconfig import ConfigError


@dataclass
class Eigenspace:
    U: np.ndarray  # (M, p), orthonormal columns

    @property
    def p(self):
        return self.U.shape[1]

    def projector(self):
        return self.U @ self.U.conj().T


@dataclass
class GroupAssignment:
    groups: list  # list of sorted UE-index lists
    centers: list  # list of Eigenspace
    total_cost: float
    labels: np.ndarray  # (K,) group id per UE
    distances: np.ndarray  # (K,) chordal distance of each UE to its center
    history: list = field(default_factory=list)

    @property
    def G(self):
        return len(self.groups)

    def sizes(self):
        return [len(g) for g in self.groups]


def _fix_phase(V):
    # make the largest-magnitude entry of each column real positive
    idx = np.argmax(np.abs(V), axis=-2)
    piv = np.take_along_axis(V, idx[..., None, :], axis=-2)
    return V * (np.abs(piv) / np.where(piv == 0, 1, piv))


def p_dominant_eigenspace(A, p: int) -> Eigenspace:
    """Eigenvectors of the ``p`` largest eigenvalues of Hermitian ``A``.

    Columns follow descending eigenvalue order.
    """
    A = np.asarray(A)
    M = A.shape[-1]
    if not 1 <= p <= M:
        raise ValueError(f"need 1 <= p <= M, got p={p}, M={M}")
    _, V = np.linalg.eigh((A + A.conj().T) / 2)
    return Eigenspace(_fix_phase(V[:, ::-1][:, :p]))


def eigenspaces(Rs, p: int) -> np.ndarray:
    """Batched dominant eigenspaces, ``(K, M, M) -> (K, M, p)``."""
    Rs = np.asarray(Rs)
    if not 1 <= p <= Rs.shape[-1]:
        raise ValueError(f"need 1 <= p <= M, got p={p}")
    H = (Rs + np.swapaxes(Rs.conj(), -1, -2)) / 2
    _, V = np.linalg.eigh(H)
    return _fix_phase(V[..., ::-1][..., :p])


def _basis(x):
    return x.U if isinstance(x, Eigenspace) else np.asarray(x)


def chordal_distance(A, B) -> float:
    """``||A A^H - B B^H||_F^2`` evaluated as ``2p - 2 sum |a_i^H b_j|^2``."""
    A, B = _basis(A), _basis(B)
    p = A.shape[1]
    d = 2 * p - 2 * np.sum(np.abs(A.conj().T @ B) ** 2)
    return float(max(d, 0.0))


def distance_matrix(centers, members) -> np.ndarray:
    """``D[g, k]`` chordal distance between center ``g`` and UE ``k``.

    Both arguments are stacks of bases, ``(G, M, p)`` and ``(K, M, p)``.
    """
    C = np.asarray(centers)
    U = np.asarray(members)
    p = U.shape[-1]
    X = np.einsum("gmi,kmj->gkij", C.conj(), U, optimize=True)
    return np.maximum(2 * p - 2 * np.sum(np.abs(X) ** 2, axis=(-1, -2)), 0.0)


def _center(Us, p):
    S = np.einsum("kmi,kni->mn", Us, Us.conj())
    return p_dominant_eigenspace(S, p).U


def _cost_of(D, labels):
    return float(D[labels, np.arange(D.shape[1])].sum())


def kmeans_group(correlations, G: int, p: int, rng, max_iter: int = 100,
                 *, bases=None) -> GroupAssignment:
    """k-means on dominant eigenspaces with the chordal distance.

    Seeds are ``G`` distinct random UEs. Each pass assigns UEs to the
    nearest center, then recomputes every center as the dominant
    eigenspace of the sum of its members' projectors. A group left empty is
    re-seeded with the UE farthest from its current center.
    """
    U = eigenspaces(correlations, p) if bases is None else np.asarray(bases)
    K = U.shape[0]
    if not 1 <= G <= K:
        raise ConfigError(f"need 1 <= G <= K, got G={G}, K={K}")
    seeds = rng.choice(K, size=G, replace=False)
    C = U[seeds].copy()
    labels = None
    history = []
    for _ in range(max_iter):
        D = distance_matrix(C, U)
        new = np.argmin(D, axis=0)
        # nearest-center assignment never raises the cost for fixed centers
        if history:
            assert _cost_of(D, new) <= history[-1] + 1e-9 * max(1.0, history[-1])
        for g in range(G):
            if not np.any(new == g):
                dist_now = D[new, np.arange(K)]
                # donors must keep at least one member
                counts = np.bincount(new, minlength=G)
                order = np.argsort(-dist_now, kind="stable")
                far = next(k for k in order if counts[new[k]] > 1)
                new[far] = g
        C = np.stack([_center(U[new == g], p) for g in range(G)])
        D = distance_matrix(C, U)
        history.append(_cost_of(D, new))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
    labels = new
    return _assignment(labels, C, D, history)


def _assignment(labels, C, D, history=()):
    G = C.shape[0]
    K = labels.size
    groups = [sorted(np.flatnonzero(labels == g).tolist()) for g in range(G)]
    dist = D[labels, np.arange(K)]
    return GroupAssignment(groups, [Eigenspace(c) for c in C], float(dist.sum()),
                           labels.copy(), dist, list(history))


def hungarian_solve(cost) -> np.ndarray:
    """Optimal assignment for a square cost matrix.

    Returns ``perm`` with row ``i`` assigned to column ``perm[i]``,
    minimizing ``sum cost[i, perm[i]]``.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    return np.asarray(kernels.linear_assignment(cost), dtype=int)


def balance_to_centers(D, N: int) -> np.ndarray:
    """Labels assigning exactly ``N`` UEs to every center at minimum total distance.

    ``D`` is the ``G x K`` center-to-UE distance matrix with ``K = G N``.
    Each row is replicated ``N`` times into a ``K x K`` matrix whose
    optimal assignment maps replicated rows (group slots) to UEs.
    """
    G, K = D.shape
    if G * N != K:
        raise ConfigError(f"balanced grouping needs K = G*N, got K={K}, G={G}, N={N}")
    H = np.repeat(D, N, axis=0)
    perm = hungarian_solve(H)
    labels = np.empty(K, dtype=int)
    labels[perm] = np.arange(K) // N
    return labels


def balanced_group(correlations, G: int, p: int, rng, max_iter: int = 100,
                   *, bases=None) -> GroupAssignment:
    """k-means followed by an exact re-balancing to ``K / G`` UEs per group."""
    U = eigenspaces(correlations, p) if bases is None else np.asarray(bases)
    K = U.shape[0]
    if K % G:
        raise ConfigError(f"K={K} is not divisible by G={G}")
    km = kmeans_group(None, G, p, rng, max_iter, bases=U)
    C = np.stack([c.U for c in km.centers])
    D = distance_matrix(C, U)
    labels = balance_to_centers(D, K // G)
    return _assignment(labels, C, D, km.history)


# ------------------------------------------------------------------ offline

def fit_offline(corpus, G: int, p: int, rng, max_iter: int = 100) -> list:
    """Fit group centers on a (large) corpus of correlation matrices."""
    return kmeans_group(corpus, G, p, rng, max_iter).centers


def assign_offline(correlations, centers, p: int, *, balanced=False) -> GroupAssignment:
    """Assign runtime UEs to fixed centers (nearest, or balanced)."""
    U = eigenspaces(correlations, p)
    C = np.stack([c.U for c in centers])
    D = distance_matrix(C, U)
    if balanced:
        labels = balance_to_centers(D, U.shape[0] // C.shape[0])
    else:
        labels = np.argmin(D, axis=0)
    return _assignment(labels, C, D)


def write_csv(path, assignment: GroupAssignment, ue_ids=None) -> None:
    """Rows ``ue_id, group_id, distance_to_center``."""
    K = assignment.labels.size
    ids = range(K) if ue_ids is None else ue_ids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ue_id", "group_id", "distance_to_center"])
        for k, uid in enumerate(ids):
            w.writerow([uid, int(assignment.labels[k]), repr(float(assignment.distances[k]))])
