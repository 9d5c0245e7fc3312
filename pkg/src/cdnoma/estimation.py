"""MMSE channel estimation from UL pilots with arbitrary pilot signatures.

Conventions: the pilot observation at a BS is ``Y_p = sum sqrt(p) h phi^T + N``
(``M x tau_p``), so ``vec(Y_p) = sum sqrt(p) (phi kron h) + vec(N)`` with
column-major ``vec``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import NumericalError, complex_normal
from .netconfig import ConfigError

COND_WARN = 1e12


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass
class ChannelEstimate:
    h_hat: np.ndarray
    Phi: np.ndarray
    C: np.ndarray


def vec(Y):
    """Column-major vectorization (stacks the columns of ``Y``)."""
    Y = np.asarray(Y)
    return np.swapaxes(Y, -1, -2).reshape(Y.shape[:-2] + (-1,))


def _flatten_ues(pilots, powers, R):
    pilots = np.asarray(pilots)
    powers = np.asarray(powers, dtype=float)
    R = np.asarray(R)
    tau = pilots.shape[-1]
    M = R.shape[-1]
    if R.shape[:-2] != pilots.shape[:-1] or powers.shape != pilots.shape[:-1]:
        raise ConfigError(
            f"dimension mismatch: pilots {pilots.shape}, powers {powers.shape}, "
            f"correlations {R.shape}")
    if R.shape[-2] != M:
        raise ConfigError("correlation matrices must be square")
    return pilots.reshape(-1, tau), powers.reshape(-1), R.reshape(-1, M, M)


def build_Q(pilots, powers, R, sigma2_ul) -> np.ndarray:
    """Covariance of ``vec(Y_p)`` at one BS.

    ``pilots[..., :]`` are the pilot vectors of every UE, ``powers[...]``
    their pilot powers and ``R[..., :, :]`` their correlation matrices as
    seen from this BS (any common leading shape, e.g. ``(L, K)``).
    Returns ``sum p (phi phi^H) kron R + sigma2 I``.
    """
    phi, p, R = _flatten_ues(pilots, powers, R)
    tau, M = phi.shape[1], R.shape[-1]
    Q = np.zeros((M * tau, M * tau), dtype=complex)
    for ph, pw, Rk in zip(phi, p, R):
        if pw:
            Q += pw * np.kron(np.outer(ph, ph.conj()), Rk)
    Q[np.diag_indices_from(Q)] += sigma2_ul
    return Q


def _factor(Q):
    cond = np.linalg.cond(Q)
    if cond > COND_WARN:
        warnings.warn(f"pilot covariance is ill-conditioned (cond={cond:.2e}); "
                      "solving anyway", IllConditionedWarning, stacklevel=3)
    return cho_factor(Q, lower=True)


def pilots_orthogonal_or_identical(pilots, tol=1e-9) -> bool:
    """True when any two assigned pilots are either identical or orthogonal."""
    phi = np.asarray(pilots).reshape(-1, np.shape(pilots)[-1])
    tau = phi.shape[1]
    G = phi.conj() @ phi.T
    same = np.all(np.abs(phi[:, None, :] - phi[None, :, :]) <= tol, axis=-1)
    return bool(np.all(same | (np.abs(G) <= tol * tau)))


def error_covariance(R, Phi) -> np.ndarray:
    """``C = R - Phi``, checked to be PSD within ``1e-9 tr(R)/M``."""
    C = np.asarray(R) - np.asarray(Phi)
    M = C.shape[-1]
    tol = 1e-9 * np.real(np.trace(R, axis1=-2, axis2=-1)) / M
    Ch = (C + np.swapaxes(C.conj(), -1, -2)) / 2
    lam = np.linalg.eigvalsh(Ch).min(axis=-1)
    if np.any(lam < -tol):
        raise NumericalError(f"error covariance is not PSD: eigenvalue {np.min(lam):.3e}")
    return C


def mmse_estimate(Y_p, target, pilots, R, powers, sigma2_ul, *, route="auto") -> ChannelEstimate:
    """MMSE estimate of one UE's channel at one BS from its pilot observation.

    ``target`` indexes the UE in the leading shape of ``pilots``/``R``/
    ``powers`` (e.g. ``(l, i)``). ``route="auto"`` uses the classical
    ``M x M`` estimator when all pilots are pairwise identical or
    orthogonal and the full ``M tau_p`` form otherwise; ``"general"`` and
    ``"classical"`` force a route.
    """
    pilots = np.asarray(pilots)
    powers = np.asarray(powers, dtype=float)
    R = np.asarray(R)
    Y_p = np.asarray(Y_p)
    if route == "auto":
        route = "classical" if pilots_orthogonal_or_identical(pilots) else "general"
    if route == "classical":
        return classical_estimate(Y_p, target, pilots, R, powers, sigma2_ul)
    if route != "general":
        raise ValueError(f"unknown route {route!r}")

    phi_t = pilots[target]
    R_t = R[target]
    p_t = powers[target]
    M = R_t.shape[0]
    if Y_p.shape != (M, pilots.shape[-1]):
        raise ConfigError(f"pilot observation must be {M} x {pilots.shape[-1]}, got {Y_p.shape}")
    fac = _factor(build_Q(pilots, powers, R, sigma2_ul))
    # cross = sqrt(p) (phi^H kron R), M x M tau
    cross = np.sqrt(p_t) * np.kron(phi_t.conj()[None, :], R_t)
    h_hat = cross @ cho_solve(fac, vec(Y_p))
    Phi = cross @ cho_solve(fac, cross.conj().T)
    Phi = (Phi + Phi.conj().T) / 2
    return ChannelEstimate(h_hat, Phi, error_covariance(R_t, Phi))


def classical_estimate(Y_p, target, pilots, R, powers, sigma2_ul) -> ChannelEstimate:
    """Orthogonal-pilot MMSE estimator, ``sqrt(p) R Qbar^{-1} (Y_p phi^*)``.

    ``Qbar = sum_{same pilot} p tau_p R + sigma2 I``. Only valid when every
    pair of pilots is identical or orthogonal.
    """
    pilots = np.asarray(pilots)
    phi_t = pilots[target]
    tau = pilots.shape[-1]
    lead = pilots.shape[:-1]
    same = np.all(np.isclose(pilots, phi_t), axis=-1)
    R_t = np.asarray(R)[target]
    M = R_t.shape[0]
    Qbar = np.eye(M, dtype=complex) * sigma2_ul
    for idx in np.ndindex(lead):
        if same[idx]:
            Qbar = Qbar + powers[idx] * tau * R[idx]
    fac = cho_factor(Qbar, lower=True)
    y = np.asarray(Y_p) @ phi_t.conj()
    p_t = powers[target]
    h_hat = np.sqrt(p_t) * R_t @ cho_solve(fac, y)
    Phi = p_t * tau * R_t @ cho_solve(fac, R_t)
    Phi = (Phi + Phi.conj().T) / 2
    return ChannelEstimate(h_hat, Phi, error_covariance(R_t, Phi))


def pilot_observation(H, pilots, powers, sigma2_ul, rng):
    """Simulate ``Y_p`` at one BS; ``H[..., :]`` are the channels to that BS."""
    pilots = np.asarray(pilots)
    tau = pilots.shape[-1]
    phi = pilots.reshape(-1, tau)
    p = np.asarray(powers, dtype=float).reshape(-1)
    h = np.asarray(H).reshape(-1, np.shape(H)[-1])
    M = h.shape[1]
    Y = (np.sqrt(p)[:, None] * h).T @ phi
    return Y + np.sqrt(sigma2_ul) * complex_normal(rng, (M, tau))


class EstimatorBank:
    """Per-drop MMSE estimator statistics for every (BS, UE) pair.

    ``R`` has shape ``(L, L, K, M, M)`` (``[j, l, k]`` = UE ``k`` of cell
    ``l`` seen from BS ``j``), ``pilots`` ``(L, K, tau_p)``. After
    construction ``Phi`` and ``C`` hold the estimate and error covariances
    and :meth:`estimate` maps true channels to estimates.
    """

    def __init__(self, R, pilots, powers, sigma2_ul, *, route="auto"):
        self.R = np.asarray(R)
        self.pilots = np.asarray(pilots)
        self.powers = np.asarray(powers, dtype=float)
        self.sigma2 = float(sigma2_ul)
        L, _, K, M, _ = self.R.shape
        self.L, self.K, self.M = L, K, M
        self.tau = self.pilots.shape[-1]
        if route == "auto":
            route = "classical" if pilots_orthogonal_or_identical(self.pilots) else "general"
        self.route = route
        if route == "classical":
            self._build_classical()
        elif route == "general":
            self._build_general()
        else:
            raise ValueError(f"unknown route {route!r}")
        self.C = error_covariance(self.R, self.Phi)

    # -- classical: observation despread per pilot class
    def _build_classical(self):
        L, K, M, tau = self.L, self.K, self.M, self.tau
        flat = self.pilots.reshape(L * K, tau)
        classes = []
        index = np.empty(L * K, dtype=int)
        for u in range(L * K):
            for c, rep in enumerate(classes):
                if np.allclose(flat[rep], flat[u]):
                    index[u] = c
                    break
            else:
                index[u] = len(classes)
                classes.append(u)
        self.pilot_class = index.reshape(L, K)
        self.class_vectors = flat[classes]
        n_cls = len(classes)
        onehot = np.zeros((L * K, n_cls))
        onehot[np.arange(L * K), index] = 1.0
        self._onehot = onehot
        pw = self.powers.reshape(L * K)
        Rf = self.R.reshape(L, L * K, M, M)
        Qbar = np.einsum("u,uc,juab->jcab", pw * tau, onehot, Rf) + self.sigma2 * np.eye(M)
        self.Qbar = Qbar  # (L, n_cls, M, M)
        Qg = Qbar[:, index]  # (L, L*K, M, M)
        # A = sqrt(p) R Qbar^{-1};  Qbar Hermitian so A = sqrt(p) (Qbar^{-1} R)^H
        X = np.linalg.solve(Qg, Rf)
        A = np.sqrt(pw)[None, :, None, None] * np.swapaxes(X.conj(), -1, -2)
        self.A = A.reshape(L, L, K, M, M)
        Phi = (pw * tau)[None, :, None, None] * (Rf @ X)
        Phi = (Phi + np.swapaxes(Phi.conj(), -1, -2)) / 2
        self.Phi = Phi.reshape(L, L, K, M, M)

    # -- general: Q is M tau x M tau per BS
    def _build_general(self):
        L, K, M, tau = self.L, self.K, self.M, self.tau
        self.Qfac = []
        self.B = np.empty((L, L, K, M, M * tau), dtype=complex)
        self.Phi = np.empty((L, L, K, M, M), dtype=complex)
        for j in range(L):
            fac = _factor(build_Q(self.pilots, self.powers, self.R[j], self.sigma2))
            self.Qfac.append(fac)
            for l in range(L):
                for k in range(K):
                    cross = np.sqrt(self.powers[l, k]) * np.kron(
                        self.pilots[l, k].conj()[None, :], self.R[j, l, k])
                    Bt = cho_solve(fac, cross.conj().T)  # Q^{-1} cross^H
                    self.B[j, l, k] = Bt.conj().T
                    P = cross @ Bt
                    self.Phi[j, l, k] = (P + P.conj().T) / 2

    def cross_covariance(self, j, a, b) -> np.ndarray:
        """``E{h_a^j (h_hat_b^j)^H}`` for UEs ``a = (l, k)`` and ``b`` at BS ``j``."""
        (la, ka), (lb, kb) = a, b
        Ra, Rb = self.R[j, la, ka], self.R[j, lb, kb]
        pa, pb = self.powers[la, ka], self.powers[lb, kb]
        if self.route == "classical":
            if self.pilot_class[la, ka] != self.pilot_class[lb, kb]:
                return np.zeros((self.M, self.M), dtype=complex)
            Q = self.Qbar[j, self.pilot_class[lb, kb]]
            return np.sqrt(pa * pb) * self.tau * Ra @ np.linalg.solve(Q, Rb)
        ca = np.kron(self.pilots[la, ka].conj()[None, :], Ra)
        cb = np.kron(self.pilots[lb, kb].conj()[None, :], Rb)
        return np.sqrt(pa * pb) * ca @ cho_solve(self.Qfac[j], cb.conj().T)

    def estimate(self, H, rng) -> np.ndarray:
        """Simulate pilot reception and return the MMSE estimates.

        ``H`` has shape ``(T, L, L, K, M)`` (true channels ``[t, j, l, k]``);
        the result has the same shape.
        """
        T = H.shape[0]
        L, K, M, tau = self.L, self.K, self.M, self.tau
        pw = np.sqrt(self.powers.reshape(L * K))
        Hf = H.reshape(T, L, L * K, M) * pw[None, None, :, None]
        if self.route == "classical":
            n_cls = self._onehot.shape[1]
            # despread observation per pilot class: tau sum sqrt(p) h + CN(0, tau sigma2)
            y = tau * np.einsum("tjum,uc->tjcm", Hf, self._onehot)
            y += np.sqrt(tau * self.sigma2) * complex_normal(rng, y.shape)
            yg = y[:, :, self.pilot_class.reshape(-1)]  # (T, L, LK, M)
            A = self.A.reshape(L, L * K, M, M)
            # batched over (j, u): out = A y, with the trial axis as columns
            yb = np.moveaxis(yg, 0, -1).reshape(L * L * K, M, T)
            out = A.reshape(L * L * K, M, M) @ yb
            return np.moveaxis(out.reshape(L, L * K, M, T), -1, 0).reshape(T, L, L, K, M)
        phi = self.pilots.reshape(L * K, tau)
        Y = np.einsum("tjum,up->tjpm", Hf, phi)  # columns of Y_p stacked: vec order (p, m)
        Y += np.sqrt(self.sigma2) * complex_normal(rng, Y.shape)
        Yv = Y.reshape(T, L, tau * M)
        B = self.B.reshape(L, L * K, M, M * tau)
        out = np.einsum("juma,tja->tjum", B, Yv, optimize=True)
        return out.reshape(T, L, L, K, M)
