"""Pilot and data spreading signatures and their assignment to UEs.

Every signature has squared norm equal to its length. Assignments are
integer arrays of shape ``(L, K)`` holding the signature index of UE
``k`` in cell ``l``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

KINDS = ("orthogonal", "random", "sparse")


@dataclass
class SignatureSet:
    vectors: np.ndarray  # (count, N) complex
    kind: str
    assignment: np.ndarray | None = None  # (L, K) int

    @property
    def N(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]

    def assigned(self, assignment=None) -> np.ndarray:
        """Per-UE signature vectors, shape ``(L, K, N)``."""
        a = self.assignment if assignment is None else assignment
        if a is None:
            raise ValueError("signature set has no assignment")
        return self.vectors[np.asarray(a)]

    def with_assignment(self, assignment) -> "SignatureSet":
        assignment = np.asarray(assignment, dtype=int)
        if assignment.size and (assignment.min() < 0 or assignment.max() >= len(self)):
            raise ValueError("assignment refers to a signature outside the set")
        return SignatureSet(self.vectors, self.kind, assignment)

    def is_orthogonal(self, tol=1e-9) -> bool:
        """True when distinct vectors of the set are mutually orthogonal."""
        G = self.vectors.conj() @ self.vectors.T
        off = G - np.diag(np.diag(G))
        return bool(np.max(np.abs(off), initial=0.0) <= tol * self.N)

    def gram(self) -> np.ndarray:
        return self.vectors.conj() @ self.vectors.T


def orthogonal_set(N: int) -> SignatureSet:
    """``N`` mutually orthogonal length-``N`` signatures.

    Sylvester-Hadamard rows when ``N`` is a power of two, DFT columns
    otherwise.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if N & (N - 1) == 0:
        vec = hadamard(N).astype(complex)
    else:
        n = np.arange(N)
        vec = np.exp(-2j * np.pi * np.outer(n, n) / N)
    return SignatureSet(vec, "orthogonal")


def random_pm1_set(N: int, count: int, rng) -> SignatureSet:
    """``count`` independent signatures with i.i.d. +-1 entries."""
    vec = rng.choice(np.array([-1.0, 1.0]), size=(count, N)).astype(complex)
    return SignatureSet(vec, "random")


def sparse_set(N: int, count: int, rng) -> SignatureSet:
    """Low-density signatures: one entry ``sqrt(N)`` at a uniform position."""
    vec = np.zeros((count, N), dtype=complex)
    vec[np.arange(count), rng.integers(0, N, size=count)] = np.sqrt(N)
    return SignatureSet(vec, "sparse")


def make_set(kind: str, N: int, count: int = 0, rng=None) -> SignatureSet:
    if kind == "orthogonal":
        return orthogonal_set(N)
    if rng is None:
        raise ValueError(f"{kind} signatures need an rng")
    if kind == "random":
        return random_pm1_set(N, count, rng)
    if kind == "sparse":
        return sparse_set(N, count, rng)
    raise ValueError(f"unknown signature kind {kind!r}; expected one of {KINDS}")


# ------------------------------------------------------------- assignments

def cyclic_assignment(L: int, K: int, n: int) -> np.ndarray:
    """UE ``k`` of every cell gets signature ``k mod n`` (pilot reuse)."""
    return np.tile(np.arange(K) % n, (L, 1))


def distinct_assignment(L: int, K: int) -> np.ndarray:
    """Signature ``l*K + k`` for UE ``k`` of cell ``l`` (per-UE random sets)."""
    return np.arange(L * K).reshape(L, K)


def random_assignment(L: int, K: int, n: int, rng) -> np.ndarray:
    """Uniform choice among ``n`` signatures per UE; collisions allowed."""
    return rng.integers(0, n, size=(L, K))


def grouped_assignment(groups_per_cell, K: int, n: int) -> np.ndarray:
    """Distinct signatures inside each group, the same set reused across groups.

    ``groups_per_cell[l]`` is a list of UE-index collections for cell ``l``;
    the ``r``-th member (in sorted order) of every group gets signature
    ``r mod n``, so groups of at most ``n`` UEs see no collision.
    """
    L = len(groups_per_cell)
    out = np.full((L, K), -1, dtype=int)
    for l, groups in enumerate(groups_per_cell):
        for members in groups:
            for r, k in enumerate(sorted(members)):
                out[l, k] = r % n
    if np.any(out < 0):
        raise ValueError("groups do not cover every UE")
    return out


def co_signature_index(assignment, j: int, k: int, include_self: bool = False):
    """UEs ``(l, i)`` that use the same signature index as UE ``(j, k)``.

    ``(j, k)`` itself is returned only with ``include_self=True``.
    """
    a = np.asarray(assignment.assignment if isinstance(assignment, SignatureSet) else assignment)
    ls, is_ = np.nonzero(a == a[j, k])
    out = {(int(l), int(i)) for l, i in zip(ls, is_)}
    if not include_self:
        out.discard((j, k))
    return out


def write_csv(path, sigset: SignatureSet) -> None:
    """Write the set (and its assignment when present) as CSV.

    Rows ``signature, n, re, im`` for every entry, followed by
    ``assignment, cell, ue, index`` rows.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["record", "a", "b", "value_re_or_index", "value_im"])
        for s, vec in enumerate(sigset.vectors):
            for n, x in enumerate(vec):
                w.writerow(["signature", s, n, repr(float(x.real)), repr(float(x.imag))])
        if sigset.assignment is not None:
            for (l, k), idx in np.ndenumerate(sigset.assignment):
                w.writerow(["assignment", l, k, int(idx), ""])


def read_csv(path, kind: str = "orthogonal") -> SignatureSet:
    sig, assign = {}, {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for rec, a, b, v1, v2 in r:
            if rec == "signature":
                sig[(int(a), int(b))] = float(v1) + 1j * float(v2)
            else:
                assign[(int(a), int(b))] = int(v1)
    count = 1 + max(s for s, _ in sig)
    N = 1 + max(n for _, n in sig)
    vec = np.zeros((count, N), dtype=complex)
    for (s, n), x in sig.items():
        vec[s, n] = x
    assignment = None
    if assign:
        L = 1 + max(l for l, _ in assign)
        K = 1 + max(k for _, k in assign)
        assignment = np.zeros((L, K), dtype=int)
        for (l, k), idx in assign.items():
            assignment[l, k] = idx
    return SignatureSet(vec, kind, assignment)
