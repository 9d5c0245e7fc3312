"""Effective channels, UL combining and DL precoding.

An effective channel is ``g = u kron h`` (length ``M N``), i.e.
``vec(h u^T)``. All matrix inverses are applied through Cholesky solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class ContractError(ValueError):
    """Raised when an input violates an operation's precondition."""


@dataclass
class EffectiveChannel:
    g: np.ndarray
    g_hat: np.ndarray | None = None


def effective_channel(u, h, h_hat=None) -> EffectiveChannel:
    """``g = u kron h`` and, if given, ``g_hat = u kron h_hat``."""
    u = np.asarray(u)
    g = np.kron(u, h)
    return EffectiveChannel(g, None if h_hat is None else np.kron(u, h_hat))


def kron_vectors(u, h):
    """Batched ``u kron h``: ``u (..., N)``, ``h (..., M)`` -> ``(..., N M)``."""
    u = np.asarray(u)
    h = np.asarray(h)
    out = u[..., :, None] * h[..., None, :]
    return out.reshape(out.shape[:-2] + (-1,))


def build_Z(u, powers, C, sigma2_ul) -> np.ndarray:
    """``sum p (u u^H) kron C + sigma2 I`` over the UEs given (flattened)."""
    u = np.asarray(u).reshape(-1, np.shape(u)[-1])
    p = np.asarray(powers, dtype=float).reshape(-1)
    C = np.asarray(C).reshape((-1,) + np.shape(C)[-2:])
    N, M = u.shape[1], C.shape[-1]
    Z = np.zeros((M * N, M * N), dtype=complex)
    for uk, pk, Ck in zip(u, p, C):
        Z += pk * np.kron(np.outer(uk, uk.conj()), Ck)
    Z[np.diag_indices_from(Z)] += sigma2_ul
    return Z


def _system(g_hat_all, powers, Z):
    G = np.asarray(g_hat_all).reshape(-1, np.shape(g_hat_all)[-1])
    p = np.asarray(powers, dtype=float).reshape(-1)
    A = (G.T * p) @ G.conj() + Z
    return G, p, A


def n_mmse_combiner(g_hat_all, powers, Z, target=None) -> np.ndarray:
    """N-MMSE combiners ``p_k (sum p g_hat g_hat^H + Z)^{-1} g_hat_k``.

    ``g_hat_all`` are the effective estimates of every UE seen by this BS
    (flattened over leading axes). The system matrix is factored once.
    With ``target`` (flat index) a single ``MN`` vector is returned,
    otherwise one column per UE, shape ``(n, MN)``.
    """
    G, p, A = _system(g_hat_all, powers, Z)
    try:
        fac = cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("N-MMSE system matrix is not positive definite") from exc
    if target is not None:
        return p[target] * cho_solve(fac, G[target])
    V = cho_solve(fac, G.T) * p
    return V.T


def mr_combiner(g_hat) -> np.ndarray:
    return np.array(g_hat, copy=True)


def classical_mmse_combiner(h_hat_all, powers, C_all, sigma2_ul, target=None):
    """Multicell MMSE combining of conventional massive MIMO (no spreading).

    ``p_k (sum p (h_hat h_hat^H + C) + sigma2 I)^{-1} h_hat_k``; ``M``-sized.
    """
    Hh = np.asarray(h_hat_all).reshape(-1, np.shape(h_hat_all)[-1])
    p = np.asarray(powers, dtype=float).reshape(-1)
    C = np.asarray(C_all).reshape((-1,) + np.shape(C_all)[-2:])
    M = Hh.shape[1]
    A = (Hh.T * p) @ Hh.conj() + np.einsum("k,kab->ab", p, C) + sigma2_ul * np.eye(M)
    fac = cho_factor(A, lower=True)
    if target is not None:
        return p[target] * cho_solve(fac, Hh[target])
    return (cho_solve(fac, Hh.T) * p).T


def orthogonal_mmse_combiner(h_hat_all, powers, C_all, sigma2_ul, signatures, assignment, target):
    """``M``-sized combiner for mutually orthogonal spreading signatures.

    Only the co-signature set of ``target`` (UEs with the same signature
    index, itself included) enters:
    ``v = p (sum_C p h_hat h_hat^H + sum_C p C + sigma2/N I)^{-1} h_hat``.
    ``signatures`` is the ``(count, N)`` set and ``assignment`` the flat
    signature index of every UE.
    """
    sig = np.asarray(signatures)
    G = sig.conj() @ sig.T
    N = sig.shape[1]
    off = G - np.diag(np.diag(G))
    if np.max(np.abs(off), initial=0.0) > 1e-9 * N:
        raise ContractError("orthogonal_mmse_combiner needs mutually orthogonal signatures")
    a = np.asarray(assignment).reshape(-1)
    Hh = np.asarray(h_hat_all).reshape(-1, np.shape(h_hat_all)[-1])
    p = np.asarray(powers, dtype=float).reshape(-1)
    C = np.asarray(C_all).reshape((-1,) + np.shape(C_all)[-2:])
    members = np.flatnonzero(a == a[target])
    M = Hh.shape[1]
    A = (Hh[members].T * p[members]) @ Hh[members].conj()
    A += np.einsum("k,kab->ab", p[members], C[members]) + (sigma2_ul / N) * np.eye(M)
    return p[target] * cho_solve(cho_factor(A, lower=True), Hh[target])


@dataclass
class Precoder:
    w: np.ndarray
    norm2: float  # E{||v||^2} used for the scaling


def precoder_from_combiner(v, mode="deterministic", *, u=None, Phi=None, samples=None,
                           min_samples=10_000) -> Precoder:
    """Scale a combiner into a precoder with ``E{||w||^2} = 1``.

    ``mode``:
      ``"deterministic"``  ``w = v / ||v||``;
      ``"mr"``             MR closed form, ``E{||g_hat||^2} = ||u||^2 tr(Phi)``;
      ``"monte-carlo"``    ``samples`` are independent draws of the combiner
                           (``(T, MN)``), ``E{||v||^2}`` is their mean power.
    """
    v = np.asarray(v)
    if mode == "deterministic":
        norm2 = float(np.vdot(v, v).real)
    elif mode == "mr":
        if u is None or Phi is None:
            raise ValueError("MR normalization needs u and Phi")
        norm2 = float(np.vdot(u, u).real * np.trace(Phi).real)
    elif mode == "monte-carlo":
        if samples is None:
            raise ValueError("monte-carlo normalization needs combiner samples")
        samples = np.asarray(samples)
        if samples.shape[0] < min_samples:
            raise ValueError(f"need at least {min_samples} combiner samples for the "
                             f"normalization, got {samples.shape[0]}")
        norm2 = float(np.mean(np.sum(np.abs(samples) ** 2, axis=-1)))
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    return Precoder(v / np.sqrt(norm2), norm2)
