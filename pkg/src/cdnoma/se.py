"""Spectral-efficiency evaluation.

Uplink: Monte Carlo average of ``log2(1 + SINR)`` over channel
realizations. Downlink: the hardening bound, from sample moments of the
precoded channels or in closed form for MR precoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import los_inner_product

Z95 = 1.959963984540054
DL_MIN_TRIALS = 100


@dataclass
class SEResult:
    """Per-UE spectral efficiency, arrays shaped like the UE grid."""

    se: np.ndarray
    sinr_mean: np.ndarray
    trials: int
    ci_halfwidth: np.ndarray

    @property
    def sum_se(self):
        return float(np.sum(self.se))


def log2_1p(x):
    """``log2(1 + x)`` accurate for small ``x``."""
    return np.log1p(x) / np.log(2.0)


def ul_prelog(N, tau_u, tau_c):
    return tau_u / (N * tau_c)


def dl_prelog(N, tau_d, tau_c):
    return tau_d / (N * tau_c)


# ----------------------------------------------------------------- uplink

def ul_sinr(v, g_hat_all, powers, Z, target) -> float:
    """Instantaneous UL SINR of UE ``target`` with combiner ``v``.

    ``p |v^H g_hat_k|^2 / v^H (sum_{i != k} p g_hat_i g_hat_i^H + Z) v``.
    """
    G = np.asarray(g_hat_all).reshape(-1, np.shape(g_hat_all)[-1])
    p = np.asarray(powers, dtype=float).reshape(-1)
    proj = G.conj() @ v  # g_i^H v
    sig = p[target] * abs(proj[target]) ** 2
    interf = np.sum(p * np.abs(proj) ** 2) - sig
    noise = np.vdot(v, Z @ v).real
    return float(sig / (interf + noise))


def ul_sinr_mmse(g_hat_all, powers, Z, target) -> float:
    """Maximum UL SINR, ``p g_k^H (sum_{i != k} p g_i g_i^H + Z)^{-1} g_k``."""
    G = np.asarray(g_hat_all).reshape(-1, np.shape(g_hat_all)[-1])
    p = np.asarray(powers, dtype=float).reshape(-1)
    mask = np.ones(G.shape[0], bool)
    mask[target] = False
    A = (G[mask].T * p[mask]) @ G[mask].conj() + Z
    x = cho_solve(cho_factor(A, lower=True), G[target])
    return float(p[target] * np.vdot(G[target], x).real)


def ul_se(sinr_samples, *, N=1, tau_u=1, tau_c=1) -> SEResult:
    """UL SE ``(1/N)(tau_u/tau_c) E{log2(1 + SINR)}`` from per-trial SINRs.

    ``sinr_samples`` has the trial axis first. The confidence half-width is
    the 95% normal interval of the sample mean.
    """
    s = np.asarray(sinr_samples, dtype=float)
    T = s.shape[0]
    pre = ul_prelog(N, tau_u, tau_c)
    rate = log2_1p(s)
    se = pre * rate.mean(axis=0)
    if T > 1:
        ci = Z95 * pre * rate.std(axis=0, ddof=1) / np.sqrt(T)
    else:
        ci = np.full_like(se, np.nan)
    return SEResult(se, s.mean(axis=0), T, ci)


# --------------------------------------------------------------- downlink

def dl_sinr_from_moments(mean_gain, second_moment, rho, sigma2_dl):
    """Hardening-bound SINR from the precoded-channel moments.

    ``mean_gain[a]`` is ``E{w_a^H g_a}`` and ``second_moment[b, a]`` is
    ``E{|w_b^H g_a|^2}`` (precoder of UE ``b`` from its own BS, channel of
    UE ``a`` from that BS); UEs are flattened. ``rho`` are the DL powers.
    """
    rho = np.asarray(rho, dtype=float).reshape(-1)
    sig = rho * np.abs(mean_gain) ** 2
    total = rho @ second_moment
    return sig / (total - sig + sigma2_dl)


def precoded_gains(W, Gl):
    """``X[t, b, a] = w_b^H g_a^{bs(b)}``.

    ``W`` is ``(T, L, K, D)`` (precoder of each UE, from its own BS) and
    ``Gl`` is ``(T, L, L, K, D)`` with ``Gl[t, j, l, k]`` the effective
    channel of UE ``(l, k)`` from BS ``j``.
    """
    T, L, K, D = W.shape
    X = np.einsum("tjbd,tjad->tjba", W.conj(), Gl.reshape(T, L, L * K, D), optimize=True)
    return X.reshape(T, L * K, L * K)


def dl_se_hardening(gains, rho, sigma2_dl, *, N=1, tau_d=1, tau_c=1,
                    min_trials=DL_MIN_TRIALS) -> SEResult:
    """DL SE from sampled precoded gains (see :func:`precoded_gains`).

    ``gains[t, b, a] = w_b^H g_a`` over ``T`` independent realizations.
    """
    X = np.asarray(gains)
    T = X.shape[0]
    if T < min_trials:
        raise ValueError(
            f"hardening bound needs at least {min_trials} trials, got {T}; the mean "
            "and second moment of the precoded channels must be estimated reliably "
            "(raise trials or lower min_trials explicitly)")
    n = X.shape[1]
    mean_gain = X[:, np.arange(n), np.arange(n)].mean(axis=0)
    second = np.mean(np.abs(X) ** 2, axis=0)
    sinr = dl_sinr_from_moments(mean_gain, second, rho, sigma2_dl)
    se = dl_prelog(N, tau_d, tau_c) * log2_1p(sinr)
    ci = _dl_ci(X, rho, sigma2_dl, N, tau_d, tau_c)
    return SEResult(se, sinr, T, ci)


def _dl_ci(X, rho, sigma2_dl, N, tau_d, tau_c, batches=10):
    # batch-means spread of the SE estimate
    T = X.shape[0]
    if T < 2 * batches:
        return np.full(X.shape[1], np.nan)
    n = X.shape[1]
    vals = []
    for part in np.array_split(np.arange(T), batches):
        Xb = X[part]
        mg = Xb[:, np.arange(n), np.arange(n)].mean(axis=0)
        sm = np.mean(np.abs(Xb) ** 2, axis=0)
        vals.append(dl_prelog(N, tau_d, tau_c) * log2_1p(dl_sinr_from_moments(mg, sm, rho, sigma2_dl)))
    vals = np.array(vals)
    return Z95 * vals.std(axis=0, ddof=1) / np.sqrt(batches)


def dl_mr_moments(u, bank):
    """Closed-form hardening moments for MR precoding.

    ``u`` is ``(L, K, N)``; ``bank`` an :class:`~cdnoma.estimation.EstimatorBank`.
    The precoder of UE ``b`` is ``u_b kron h_hat_b / sqrt(||u_b||^2 tr Phi_b)``
    from its own BS. With jointly Gaussian ``(g, g_hat)``,
    ``E{|w_b^H g_a|^2} = (|u_b^H u_a|^2 tr(R_a Phi_b)
    + |u_b^H u_a|^2 |tr E{h_a h_hat_b^H}|^2) / (||u_b||^2 tr Phi_b)``.
    Returns ``(mean_gain, second_moment)`` in the layout of
    :func:`dl_sinr_from_moments`.
    """
    u = np.asarray(u)
    L, K, _ = u.shape
    n = L * K
    uf = u.reshape(n, -1)
    U = uf.conj() @ uf.T  # U[b, a] = u_b^H u_a
    un2 = np.real(np.diag(U))
    trPhi_own = np.array([np.trace(bank.Phi[l, l, k]).real for l in range(L) for k in range(K)])
    second = np.zeros((n, n))
    for b in range(n):
        lb, kb = divmod(b, K)
        Phi_b = bank.Phi[lb, lb, kb]
        norm2 = un2[b] * trPhi_own[b]
        Ra = bank.R[lb].reshape(n, bank.M, bank.M)
        tr_RPhi = np.einsum("aij,ji->a", Ra, Phi_b).real
        coh = np.zeros(n)
        for a in range(n):
            la, ka = divmod(a, K)
            X = bank.cross_covariance(lb, (la, ka), (lb, kb))
            coh[a] = abs(np.trace(X)) ** 2
        second[b] = np.abs(U[b]) ** 2 * (tr_RPhi + coh) / norm2
    mean_gain = np.sqrt(un2 * trPhi_own)
    return mean_gain, second


def dl_mr_closed_form(u, bank, rho, sigma2_dl, *, N=None, tau_d=1, tau_c=1) -> SEResult:
    """DL SE with MR precoding evaluated in closed form (no Monte Carlo)."""
    u = np.asarray(u)
    N = u.shape[-1] if N is None else N
    mg, sm = dl_mr_moments(u, bank)
    sinr = dl_sinr_from_moments(mg, sm, rho, sigma2_dl)
    rho = np.asarray(rho, dtype=float).reshape(-1)
    se = dl_prelog(N, tau_d, tau_c) * log2_1p(sinr)
    se = np.where(rho > 0, se, 0.0)
    return SEResult(se, sinr, 0, np.zeros_like(se))


def dl_mr_orth_closed_form(assignment, bank, rho, sigma2_dl, N, *, tau_d=1, tau_c=1) -> SEResult:
    """MR DL SE for orthogonal signatures and orthogonal-pilot estimation.

    Non-coherent interference from the co-signature set (UE itself
    included), coherent interference from co-signature UEs that also share
    its pilot, and noise ``sigma2_dl / N``.
    """
    if bank.route != "classical":
        raise ValueError("closed form requires orthogonal (or identical) pilots")
    a = np.asarray(assignment)
    L, K = a.shape
    rho = np.asarray(rho, dtype=float)
    tau = bank.tau
    sinr = np.zeros((L, K))
    for j in range(L):
        for k in range(K):
            R_jk = bank.R[j, j, k]
            Qi = bank.Qbar[j, bank.pilot_class[j, k]]
            num = rho[j, k] * bank.powers[j, k] * tau * np.trace(R_jk @ np.linalg.solve(Qi, R_jk)).real
            noncoh = 0.0
            coh = 0.0
            for l in range(L):
                for i in range(K):
                    if a[l, i] != a[j, k]:
                        continue
                    R_li = bank.R[l, l, i]
                    Q_li = bank.Qbar[l, bank.pilot_class[l, i]]
                    X = np.linalg.solve(Q_li, R_li)  # Q^{-1} R_li
                    den = np.trace(R_li @ X).real
                    noncoh += rho[l, i] * np.trace(bank.R[l, j, k] @ R_li @ X).real / den
                    if (l, i) != (j, k) and bank.pilot_class[l, i] == bank.pilot_class[j, k]:
                        c = np.trace(bank.R[l, j, k] @ X)
                        coh += rho[l, i] * bank.powers[j, k] * tau * abs(c) ** 2 / den
            sinr[j, k] = num / (noncoh + coh + sigma2_dl / N)
    se = dl_prelog(N, tau_d, tau_c) * log2_1p(sinr)
    return SEResult(se, sinr, 0, np.zeros_like(se))


# ---------------------------------------------------------- other metrics

def favorable_variance(R1, R2) -> float:
    """``tr(R1 R2) / (M^2 beta1 beta2)`` with ``beta = tr(R)/M``."""
    R1 = np.asarray(R1)
    R2 = np.asarray(R2)
    M = R1.shape[0]
    b1 = np.trace(R1).real / M
    b2 = np.trace(R2).real / M
    return float(np.einsum("ij,ji->", R1, R2).real / (M * M * b1 * b2))


def case_study_sinr(M, N, snr, phi1, phi2, cross_corr, scheme):
    """Two-UE LoS SINR of UE 1 with perfect CSI.

    ``cross_corr`` is ``|u1^H u2 / N|^2``. ``scheme`` is ``"mr"`` or ``"mmse"``.
    """
    a2 = abs(los_inner_product(phi1, phi2, M)) ** 2
    x = a2 * cross_corr
    gain = M * N * snr
    if scheme == "mr":
        return 1.0 / (x + 1.0 / gain)
    if scheme == "mmse":
        return gain * (1.0 - x / (1.0 + 1.0 / gain))
    raise ValueError(f"unknown scheme {scheme!r}")


def case_study_se(M, N, snr, phi1, phi2, signature_pair, scheme) -> float:
    """Two-UE LoS SE of UE 1, ``(1/N) E_U{log2(1 + SINR)}``.

    ``signature_pair`` is either a pair of signature vectors, or a sequence
    of such pairs over which the expectation is averaged (random draws).
    """
    pairs = np.asarray(signature_pair)
    if pairs.ndim == 2:
        pairs = pairs[None]
    vals = []
    for u1, u2 in pairs:
        n = u1.size
        cc = abs(np.vdot(u1, u2) / n) ** 2
        vals.append(log2_1p(case_study_sinr(M, n, snr, phi1, phi2, cc, scheme)))
    return float(np.mean(vals)) / pairs.shape[-1]
