"""Per-drop Monte Carlo evaluation of UL and DL spectral efficiency.

For one UE drop the correlation matrices, pilot statistics and every
compared signature arm are fixed; channel realizations are then shared by
all arms (common random numbers). UEs are flattened as ``l * K + k``.

Two evaluation paths exist. When the distinct signature vectors in use are
mutually orthogonal, each BS sees one classical multicell problem per
signature class with noise ``sigma2 / N`` (``M``-dimensional). Otherwise
the full ``M N``-dimensional effective channels are used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import grouping, signatures
from ..channel import complex_normal, sqrt_psd
from ..estimation import EstimatorBank
from ..se import DL_MIN_TRIALS, dl_prelog, dl_sinr_from_moments, log2_1p, ul_prelog

ARM_ASSIGNMENTS = ("none", "random", "grouped", "distinct")


@dataclass(frozen=True)
class Arm:
    """One transmission scheme: signature length, set kind and assignment.

    ``assign="none"`` is conventional massive MIMO (``N = 1``).
    """

    name: str
    N: int = 1
    kind: str = "orthogonal"
    assign: str = "none"

    def __post_init__(self):
        if self.assign not in ARM_ASSIGNMENTS:
            raise ValueError(f"unknown assignment {self.assign!r}")
        if self.assign == "none" and self.N != 1:
            raise ValueError("conventional arm must have N = 1")


MMIMO = Arm("mMIMO")


def cyclic_pilots(L, K, tau_p):
    """Orthogonal pilots of length ``tau_p`` reused round-robin in every cell."""
    book = signatures.orthogonal_set(tau_p).vectors
    return book[signatures.cyclic_assignment(L, K, tau_p)]


def arm_signatures(arm: Arm, R, rng, *, p_dim=6, max_iter=100) -> signatures.SignatureSet:
    """Signature set and ``(L, K)`` assignment for an arm in the current drop.

    ``R`` is the ``(L, L, K, M, M)`` correlation tensor; grouping uses each
    cell's own-BS matrices. Per-UE vectors are ``result.assigned()``.
    """
    L, _, K = R.shape[:3]
    N = arm.N
    if arm.assign == "none":
        return signatures.SignatureSet(np.ones((1, 1), dtype=complex), "orthogonal",
                                       np.zeros((L, K), dtype=int))
    if arm.assign == "distinct":
        sset = signatures.make_set(arm.kind, N, L * K, rng)
        return sset.with_assignment(signatures.distinct_assignment(L, K))
    sset = signatures.make_set(arm.kind, N, N, rng)
    if arm.assign == "random":
        return sset.with_assignment(signatures.random_assignment(L, K, len(sset), rng))
    if K % N:
        raise ValueError(f"grouped assignment needs K divisible by N, got K={K}, N={N}")
    G = K // N
    groups = []
    for l in range(L):
        ga = grouping.balanced_group(R[l, l], G, min(p_dim, R.shape[-1]), rng, max_iter)
        groups.append(ga.groups)
    return sset.with_assignment(signatures.grouped_assignment(groups, K, len(sset)))


def signature_classes(u, tol=1e-9):
    """Class id per UE for identical vectors, and whether classes are orthogonal.

    ``u`` is ``(n, N)``. Returns ``(class_of_ue, reps, orthogonal)``.
    """
    reps = []
    cls = np.empty(u.shape[0], dtype=int)
    for i, x in enumerate(u):
        for c, r in enumerate(reps):
            if np.max(np.abs(u[r] - x)) <= tol:
                cls[i] = c
                break
        else:
            cls[i] = len(reps)
            reps.append(i)
    V = u[reps]
    G = V.conj() @ V.T
    off = G - np.diag(np.diag(G))
    orth = bool(np.max(np.abs(off), initial=0.0) <= tol * u.shape[1])
    return cls, reps, orth


def _outer_sum(X, w):
    """``sum_s w_s x_s x_s^H`` per leading index; ``X`` is ``(T, S, D)``."""
    return np.swapaxes(X * w[None, :, None], 1, 2) @ X.conj()


def _quad(X, A):
    """``x^H A x`` for every row of ``X`` ``(T, k, D)``."""
    return np.sum((X.conj() @ A) * X, axis=-1).real


@dataclass
class DropResult:
    """Per-UE SE of every (arm, link, combiner), each ``(L, K)``."""

    se: dict  # (arm name, link, combiner) -> (L, K)
    sinr: dict  # same keys -> (L, K) mean SINR (UL) or hardening SINR (DL)
    trials: int


class _Accumulator:
    def __init__(self, n, K):
        self.log = np.zeros(n)
        self.sinr = np.zeros(n)
        self.T = 0
        # DL moments: sum raw_bb, sum |raw_ba|^2, sum ||v_b||^2
        self.s1 = np.zeros(n, dtype=complex)
        self.s2 = np.zeros((n, n))
        self.s3 = np.zeros(n)


class DropSimulator:
    """Evaluate a set of arms on one drop.

    Parameters
    ----------
    R : (L, L, K, M, M) correlation tensor.
    pilots : (L, K, tau_p) pilot vectors.
    config : NetworkConfig supplying powers, noise and the coherence split.
    arms : sequence of :class:`Arm`; ``u_by_arm`` maps names to ``(L, K, N)``
        per-UE signature vectors (or to a :class:`SignatureSet` with assignment).
    """

    def __init__(self, R, pilots, config, arms, u_by_arm, *, dl=True):
        self.R = np.asarray(R)
        self.cfg = config
        L, _, K, M, _ = self.R.shape
        self.L, self.K, self.M = L, K, M
        self.p = np.asarray(config.p_ul, dtype=float).reshape(-1)
        self.rho = np.asarray(config.rho_dl, dtype=float).reshape(-1)
        self.bank = EstimatorBank(self.R, pilots, config.p_ul, config.sigma2_ul)
        self.root = sqrt_psd(self.R)
        self.arms = list(arms)
        self.dl = dl
        self.trPhi = np.einsum("jlkmm->jlk", self.bank.Phi).real.reshape(L, L * K)
        self.plans = {}
        for a in self.arms:
            u = u_by_arm[a.name]
            if isinstance(u, signatures.SignatureSet):
                u = u.assigned()
            self.plans[a.name] = self._plan(np.asarray(u).reshape(L * K, -1))

    # ------------------------------------------------------------ planning
    def _plan(self, u):
        L, K, M = self.L, self.K, self.M
        N = u.shape[1]
        cls, reps, orth = signature_classes(u)
        Cf = self.bank.C.reshape(L, L * K, M, M)
        plan = {"u": u, "N": N, "orth": orth}
        if orth:
            groups = []
            for c in range(len(reps)):
                S = np.flatnonzero(cls == c)
                Cbar = np.einsum("s,jsab->jab", self.p[S], Cf[:, S])
                Cbar = Cbar + (self.cfg.sigma2_ul / N) * np.eye(M)
                groups.append((S, Cbar))
            plan["classes"] = groups
        else:
            uu = u[:, :, None] * u.conj()[:, None, :]  # (n, N, N)
            Z = np.einsum("s,sab,jscd->jacbd", self.p, uu, Cf, optimize=True)
            Z = Z.reshape(L, N * M, N * M) + self.cfg.sigma2_ul * np.eye(N * M)
            plan["Z"] = Z
        return plan

    # ------------------------------------------------------------- running
    def draw(self, T, rng):
        """True channels ``(T, L, L, K, M)`` and their MMSE estimates."""
        L, K, M = self.L, self.K, self.M
        z = complex_normal(rng, (L * L * K, T, M))
        # batched over links: h = R^{1/2} z, rows of z are draws
        H = z @ np.swapaxes(self.root.reshape(-1, M, M), -1, -2)
        H = np.ascontiguousarray(np.moveaxis(H, 1, 0)).reshape(T, L, L, K, M)
        return H, self.bank.estimate(H, rng)

    def run(self, trials, rng, chunk=50) -> DropResult:
        n = self.L * self.K
        acc = {(a.name, c): _Accumulator(n, self.K) for a in self.arms for c in ("MR", "MMSE")}
        done = 0
        while done < trials:
            T = min(chunk, trials - done)
            H, Hh = self.draw(T, rng)
            Hf = np.ascontiguousarray(H).reshape(T, self.L, n, self.M)
            Hhf = np.ascontiguousarray(Hh).reshape(T, self.L, n, self.M)
            for arm in self.arms:
                plan = self.plans[arm.name]
                if plan["orth"]:
                    self._chunk_classes(plan, Hf, Hhf, acc, arm.name)
                else:
                    self._chunk_generic(plan, Hf, Hhf, acc, arm.name)
            done += T
        return self._finish(acc, trials)

    def _record(self, a, tgt, sinr, raw_bb=None, raw_sq=None, vnorm=None, cols=None):
        a.log[tgt] += log2_1p(sinr).sum(axis=0)
        a.sinr[tgt] += sinr.sum(axis=0)
        if raw_bb is not None:
            a.s1[tgt] += raw_bb.sum(axis=0)
            a.s2[np.ix_(tgt, cols)] += raw_sq.sum(axis=0)
            a.s3[tgt] += vnorm.sum(axis=0)

    def _chunk_classes(self, plan, Hf, Hhf, acc, name):
        K, M = self.K, self.M
        N = plan["N"]
        T = Hf.shape[0]
        for S, Cbar in plan["classes"]:
            for j in range(self.L):
                tgt = S[(S >= j * K) & (S < (j + 1) * K)]
                if tgt.size == 0:
                    continue
                Hs = Hhf[:, j, S]  # (T, s, M)
                ps = self.p[S]
                A = _outer_sum(Hs, ps) + Cbar[j]
                Ht = Hhf[:, j, tgt]  # (T, n_t, M)
                pt = self.p[tgt]
                X = np.linalg.solve(A, np.swapaxes(Ht, 1, 2))  # (T, M, n_t)
                s = pt * np.einsum("tkm,tmk->tk", Ht.conj(), X).real
                mmse = s / (1.0 - s)
                # MR
                gram = Hs.conj() @ np.swapaxes(Ht, 1, 2)
                pw = np.abs(gram) ** 2 * ps[None, :, None]
                nrm = np.einsum("tkm,tkm->tk", Ht.conj(), Ht).real
                sig = pt * nrm ** 2
                zq = _quad(Ht, Cbar[j])
                mr = sig / (pw.sum(axis=1) - sig + zq)
                if self.dl:
                    Htrue = Hf[:, j, S]  # channels of class members from BS j
                    pos = np.searchsorted(S, tgt)
                    for comb, V, vnorm in (
                            ("MR", Ht, None),
                            ("MMSE", np.swapaxes(X, 1, 2) * pt[None, :, None], None)):
                        raw = V.conj() @ np.swapaxes(Htrue, 1, 2)
                        if comb == "MR":
                            vn = np.broadcast_to(self.trPhi[j, tgt], (T, tgt.size))
                        else:
                            vn = np.einsum("tkm,tkm->tk", V.conj(), V).real
                        # effective w = u kron v / sqrt(N E||v||^2): gains scale by N / sqrt(N)
                        bb = raw[:, np.arange(tgt.size), pos]
                        self._record(acc[(name, comb)], tgt, mr if comb == "MR" else mmse,
                                     bb * np.sqrt(N), np.abs(raw) ** 2 * N, vn, S)
                else:
                    self._record(acc[(name, "MR")], tgt, mr)
                    self._record(acc[(name, "MMSE")], tgt, mmse)

    def _chunk_generic(self, plan, Hf, Hhf, acc, name):
        K, M, L = self.K, self.M, self.L
        u, N = plan["u"], plan["N"]
        T = Hf.shape[0]
        n = L * K
        allS = np.arange(n)
        for j in range(L):
            tgt = np.arange(j * K, (j + 1) * K)
            G = (u[None, :, :, None] * Hhf[:, j, :, None, :]).reshape(T, n, N * M)
            A = _outer_sum(G, self.p) + plan["Z"][j]
            Gt = G[:, tgt]
            pt = self.p[tgt]
            X = np.linalg.solve(A, np.swapaxes(Gt, 1, 2))
            s = pt * np.einsum("tkm,tmk->tk", Gt.conj(), X).real
            mmse = s / (1.0 - s)
            gram = G.conj() @ np.swapaxes(Gt, 1, 2)
            pw = np.abs(gram) ** 2 * self.p[None, :, None]
            nrm = np.einsum("tkm,tkm->tk", Gt.conj(), Gt).real
            sig = pt * nrm ** 2
            zq = _quad(Gt, plan["Z"][j])
            mr = sig / (pw.sum(axis=1) - sig + zq)
            if not self.dl:
                self._record(acc[(name, "MR")], tgt, mr)
                self._record(acc[(name, "MMSE")], tgt, mmse)
                continue
            Htrue = Hf[:, j]  # (T, n, M)
            un2 = np.sum(np.abs(u[tgt]) ** 2, axis=1)
            for comb in ("MR", "MMSE"):
                V = Gt if comb == "MR" else np.swapaxes(X, 1, 2) * pt[None, :, None]
                Vr = V.reshape(T, K, N, M)
                # P[t, k, n, a] = V_k[n]^H h_a, then contract the signature of a
                P = Vr.conj() @ np.swapaxes(Htrue, 1, 2)[:, None]
                raw = np.einsum("tkna,an->tka", P, u, optimize=True)
                if comb == "MR":
                    vn = np.broadcast_to(un2 * self.trPhi[j, tgt], (T, K))
                else:
                    vn = np.einsum("tkm,tkm->tk", V.conj(), V).real
                bb = raw[:, np.arange(K), tgt]
                self._record(acc[(name, comb)], tgt, mr if comb == "MR" else mmse,
                             bb, np.abs(raw) ** 2, vn, allS)

    def _finish(self, acc, trials):
        cfg = self.cfg
        L, K = self.L, self.K
        se, sinr = {}, {}
        for (name, comb), a in acc.items():
            N = self.plans[name]["N"]
            se[(name, "UL", comb)] = (ul_prelog(N, cfg.tau_u, cfg.tau_c) * a.log / trials).reshape(L, K)
            sinr[(name, "UL", comb)] = (a.sinr / trials).reshape(L, K)
            if self.dl:
                if trials < DL_MIN_TRIALS:
                    raise ValueError(
                        f"DL hardening bound needs at least {DL_MIN_TRIALS} trials per drop, "
                        f"got {trials}; raise --trials or disable the DL evaluation")
                en = a.s3 / trials
                mg = (a.s1 / trials) / np.sqrt(en)
                sm = (a.s2 / trials) / en[:, None]
                g = dl_sinr_from_moments(mg, sm, self.rho, cfg.sigma2_dl)
                se[(name, "DL", comb)] = (dl_prelog(N, cfg.tau_d, cfg.tau_c) * log2_1p(g)).reshape(L, K)
                sinr[(name, "DL", comb)] = g.reshape(L, K)
        return DropResult(se, sinr, trials)
