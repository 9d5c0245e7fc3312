"""Spatial correlation models and correlated Rayleigh channel sampling.

Planar arrays are ``sqrt(M) x sqrt(M)`` with half-wavelength spacing.
Antenna ``m`` sits at row ``m // sqrt(M)`` (vertical index) and column
``m % sqrt(M)`` (horizontal index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .netconfig import ConfigError

QUAD_NODES = 64


class NumericalError(ArithmeticError):
    """A matrix that should be PSD is not (beyond tolerance)."""


@dataclass
class CorrelationMatrix:
    R: np.ndarray

    @property
    def M(self) -> int:
        return self.R.shape[0]

    @property
    def beta(self) -> float:
        return float(np.real(np.trace(self.R))) / self.M

    def check(self, atol_herm=1e-12):
        """Raise ``NumericalError`` unless Hermitian and PSD within tolerance."""
        R = self.R
        scale = max(abs(self.beta), np.finfo(float).tiny)
        if np.max(np.abs(R - R.conj().T)) > atol_herm * scale:
            raise NumericalError("correlation matrix is not Hermitian")
        lam = np.linalg.eigvalsh(R).min()
        if lam < -1e-10 * scale:
            raise NumericalError(f"correlation matrix is indefinite: eigenvalue {lam:.3e}")
        return self


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w / 2.0  # weights sum to one: uniform average over [-1, 1]


def _angle_nodes(center, spread, n=QUAD_NODES):
    if spread == 0:
        return np.array([center]), np.array([1.0])
    x, w = _gauss_legendre(n)
    return center + spread * x, w


def ula_response(azimuth: float, M: int) -> np.ndarray:
    """ULA steering vector, ``exp(j pi m sin(azimuth))`` for ``m = 0..M-1``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return np.exp(1j * np.pi * np.arange(M) * np.sin(azimuth))


def array_side(M: int) -> int:
    s = math.isqrt(M)
    if s * s != M:
        raise ConfigError(f"planar array needs a square antenna count, got M={M}")
    return s


def upa_response(azimuth: float, elevation: float, M: int) -> np.ndarray:
    """Planar-array steering vector in the flat (row-major) antenna order."""
    s = array_side(M)
    m = np.arange(M)
    row, col = m // s, m % s
    return np.exp(1j * np.pi * (row * np.sin(elevation)
                                + col * np.cos(elevation) * np.sin(azimuth)))


def los_inner_product(phi1, phi2, M: int):
    """``(1/M) a(phi1)^H a(phi2)`` through the geometric-series closed form.

    With ``w = pi (sin phi1 - sin phi2) / 2`` the sum equals
    ``exp(-j (M-1) w) sin(M w) / (M sin w)``; its magnitude is the
    Dirichlet-kernel ratio and it is exactly 1 when the sines coincide.
    Angles broadcast; scalar inputs return a ``complex``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    s1, s2 = np.sin(phi1), np.sin(phi2)
    w = np.pi * (s1 - s2) / 2.0
    den = M * np.sin(w)
    tiny = np.abs(den) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        # sin(w) = 0 with w != 0 is a grating lobe: take the limit ratio
        ratio = np.where(tiny, np.cos(M * w) / np.cos(w), np.sin(M * w) / den)
    out = np.where(s1 == s2, 1.0 + 0.0j, np.exp(-1j * (M - 1) * w) * ratio)
    return complex(out) if out.ndim == 0 else out


def _toeplitz_hermitian(first_col):
    M = first_col.size
    idx = np.arange(M)
    d = idx[:, None] - idx[None, :]
    out = first_col[np.abs(d)]
    return np.where(d >= 0, out, out.conj())


def corr_2d_one_ring(beta: float, nominal_azimuth: float, delta: float, M: int) -> CorrelationMatrix:
    """ULA one-ring correlation with scatterers uniform on ``nominal +- delta``.

    The angular average is taken with 64-node Gauss-Legendre quadrature.
    ``delta = 0`` gives the rank-one LoS matrix ``beta a a^H``.
    """
    if delta < 0:
        raise ValueError("angular spread must be >= 0")
    if delta == 0:
        a = ula_response(nominal_azimuth, M)
        return CorrelationMatrix(beta * np.outer(a, a.conj()))
    ang, w = _angle_nodes(nominal_azimuth, delta)
    lags = kernels.onering_lags_2d(np.sin(ang), w, M)
    # entry (m1, m2) depends on m1 - m2 >= 0 via lags[m1 - m2]
    return CorrelationMatrix(beta * _toeplitz_hermitian(lags))


@lru_cache(maxsize=16)
def _lag_index(M):
    s = array_side(M)
    m = np.arange(M)
    row, col = m // s, m % s
    dr = row[:, None] - row[None, :] + s - 1
    dc = col[:, None] - col[None, :] + s - 1
    return dr, dc


def corr_3d_one_ring(beta: float, nominal_azimuth: float, nominal_elevation: float,
                     azimuth_spread: float, elevation_spread: float, M: int) -> CorrelationMatrix:
    """Planar-array one-ring correlation, uniform joint angular density.

    Azimuth is uniform on ``nominal_azimuth +- azimuth_spread`` and
    elevation on ``nominal_elevation +- elevation_spread``, independently.
    The vertical phase uses the row difference, the horizontal phase the
    column difference of the two antennas.
    """
    s = array_side(M)
    if azimuth_spread < 0 or elevation_spread < 0:
        raise ValueError("angular spreads must be >= 0")
    phi, wp = _angle_nodes(nominal_azimuth, azimuth_spread)
    th, wt = _angle_nodes(nominal_elevation, elevation_spread)
    table = kernels.onering_lags_3d(np.sin(th), np.cos(th), wt, np.sin(phi), wp, s)
    dr, dc = _lag_index(M)
    return CorrelationMatrix(beta * table[dr, dc])


def sqrt_psd(R: np.ndarray) -> np.ndarray:
    """Hermitian square root of a PSD matrix (or a stack of them).

    Eigenvalues down to ``-1e-10 tr(R)/M`` are clamped to zero; anything
    more negative raises :class:`NumericalError`.
    """
    R = np.asarray(R)
    M = R.shape[-1]
    lam, V = np.linalg.eigh(R)
    scale = np.real(np.trace(R, axis1=-2, axis2=-1)) / M
    bad = lam.min(axis=-1) < -1e-10 * np.maximum(scale, np.finfo(float).tiny)
    if np.any(bad):
        worst = float(np.min(lam))
        raise NumericalError(f"matrix is not PSD: smallest eigenvalue {worst:.3e}")
    lam = np.sqrt(np.clip(lam, 0.0, None))
    return (V * lam[..., None, :]) @ np.swapaxes(V.conj(), -1, -2)


def complex_normal(rng, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channel(R, rng, size=None) -> np.ndarray:
    """Draw ``h ~ CN(0, R)``.

    ``R`` may be a :class:`CorrelationMatrix` or an array. With ``size`` a
    stack of ``size`` independent draws is returned, shape ``(size, M)``.
    """
    if isinstance(R, CorrelationMatrix):
        R = R.R
    root = sqrt_psd(R)
    M = root.shape[-1]
    n = 1 if size is None else int(size)
    z = complex_normal(rng, (n, M))
    h = z @ root.T
    return h[0] if size is None else h


# ------------------------------------------------------------------ batches

def correlation_tensor(drop, M: int, model: str = "3d", *, elevation_spread=None) -> np.ndarray:
    """All correlation matrices of a drop, shape ``(L, L, K, M, M)``.

    ``[j, l, k]`` holds the matrix of UE ``k`` in cell ``l`` seen from BS
    ``j``. ``model`` is ``"2d"``, ``"3d"``, ``"los"`` (rank one, ULA) or
    ``"iid"`` (``beta I``).
    """
    beta = drop.beta
    L, _, K = beta.shape
    out = np.empty((L, L, K, M, M), dtype=complex)
    spread = drop.delta
    el_spread = spread if elevation_spread is None else elevation_spread
    for j in range(L):
        for l in range(L):
            for k in range(K):
                b = beta[j, l, k]
                az = drop.azimuth[j, l, k]
                if model == "3d":
                    R = corr_3d_one_ring(b, az, drop.elevation[j, l, k], spread, el_spread, M).R
                elif model == "2d":
                    R = corr_2d_one_ring(b, az, spread, M).R
                elif model == "los":
                    a = ula_response(az, M)
                    R = b * np.outer(a, a.conj())
                elif model == "iid":
                    R = b * np.eye(M)
                else:
                    raise ConfigError(f"unknown channel model {model!r}")
                out[j, l, k] = R
    return out


def dump_correlations(path, Rs) -> None:
    """Write a stack of ``M x M`` matrices.

    ``.npy``: float64 array ``(n, M, M, 2)`` (row-major, real/imag
    interleaved). ``.csv``: one line per matrix row, ``re, im`` pairs.
    """
    Rs = np.asarray(Rs, dtype=complex)
    if Rs.ndim == 2:
        Rs = Rs[None]
    Rs = Rs.reshape(-1, Rs.shape[-2], Rs.shape[-1])
    inter = np.stack([Rs.real, Rs.imag], axis=-1)
    path = str(path)
    if path.endswith(".csv"):
        n, M = Rs.shape[:2]
        np.savetxt(path, inter.reshape(n * M, 2 * M), delimiter=",", fmt="%.17g",
                   header=f"n={n} M={M}")
    else:
        np.save(path, inter)


def load_correlations(path) -> np.ndarray:
    """Inverse of :func:`dump_correlations`; returns ``(n, M, M)`` complex."""
    path = str(path)
    if path.endswith(".csv"):
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
        M = raw.shape[1] // 2
        inter = raw.reshape(-1, M, M, 2)
    else:
        inter = np.load(path)
    return inter[..., 0] + 1j * inter[..., 1]
