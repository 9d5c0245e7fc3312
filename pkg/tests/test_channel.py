import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdnoma import channel as ch
from cdnoma.channel import NumericalError
from cdnoma.netconfig import ConfigError, NetworkConfig, Scenario, drop_ues

D2R = math.pi / 180


def test_ula_response_quarter_wave_steps():
    np.testing.assert_allclose(ch.ula_response(math.radians(30), 4), [1, 1j, -1, -1j], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi), st.integers(1, 80))
def test_los_inner_product_matches_sum(p1, p2, M):
    direct = np.vdot(ch.ula_response(p1, M), ch.ula_response(p2, M)) / M
    assert abs(ch.los_inner_product(p1, p2, M) - direct) <= 1e-9
    assert abs(ch.los_inner_product(p1, p2, M)) <= 1 + 1e-12


def test_los_inner_product_equal_sines():
    assert ch.los_inner_product(0.3, math.pi - 0.3, 64) == 1.0


def _riemann_2d(phi0, delta, lag, n=200_000):
    a = phi0 - delta + (np.arange(n) + 0.5) * (2 * delta / n)
    return np.mean(np.exp(1j * np.pi * lag * np.sin(a)))


def test_corr_2d_frozen_entries():
    R = ch.corr_2d_one_ring(1.0, math.radians(30), math.radians(10), 8).R
    assert R[1, 0] == pytest.approx(0.0074349118400233515722 + 0.96301045812117281953j, abs=1e-13)
    assert R[3, 0] == pytest.approx(-0.011092355790758475212 - 0.69588854426653748878j, abs=1e-13)
    assert R[4, 1] == pytest.approx(R[3, 0], abs=1e-15)  # Toeplitz
    assert R[0, 3] == pytest.approx(np.conj(R[3, 0]), abs=1e-15)


@pytest.mark.parametrize("phi0,delta,M", [(0.2, 10, 16), (-1.0, 2, 32), (1.3, 25, 8)])
def test_corr_2d_matches_riemann(phi0, delta, M):
    d = math.radians(delta)
    R = ch.corr_2d_one_ring(2.5, phi0, d, M)
    for lag in range(M):
        assert R.R[lag, 0] == pytest.approx(2.5 * _riemann_2d(phi0, d, lag), abs=1e-8)
    assert R.beta == pytest.approx(2.5)
    R.check()


def test_corr_2d_zero_spread_is_los():
    R = ch.corr_2d_one_ring(1.0, 0.4, 0.0, 6).R
    a = ch.ula_response(0.4, 6)
    np.testing.assert_allclose(R, np.outer(a, a.conj()))
    with pytest.raises(ValueError):
        ch.corr_2d_one_ring(1.0, 0.4, -1.0, 6)


def test_corr_3d_frozen_entry():
    R = ch.corr_3d_one_ring(1.0, math.radians(20), math.radians(10),
                            math.radians(5), math.radians(5), 16).R
    # antenna 6 = row 1, column 2 relative to antenna 0
    assert R[6, 0] == pytest.approx(-0.83915832431145935931 + 0.44282924359295649873j, abs=1e-12)


def test_corr_3d_matches_riemann():
    az, el, sp, M = 0.7, 0.25, math.radians(3), 16
    R = ch.corr_3d_one_ring(1.0, az, el, sp, sp, M).R
    n = 600
    grid = (np.arange(n) + 0.5) / n * 2 * sp - sp
    A = np.array([ch.upa_response(az + p, el + t, M) for t in grid for p in grid])
    oracle = A.T @ A.conj() / A.shape[0]
    np.testing.assert_allclose(R, oracle, atol=1e-5)


def test_corr_3d_structure():
    R = ch.CorrelationMatrix(ch.corr_3d_one_ring(3.0, 1.0, 0.3, 0.05, 0.05, 64).R)
    assert R.beta == pytest.approx(3.0)
    R.check()
    with pytest.raises(ConfigError):
        ch.corr_3d_one_ring(1.0, 0.0, 0.0, 0.1, 0.1, 60)


def test_check_rejects_bad_matrices():
    with pytest.raises(NumericalError):
        ch.CorrelationMatrix(np.array([[1.0, 1.0], [0.0, 1.0]])).check()
    with pytest.raises(NumericalError):
        ch.CorrelationMatrix(np.diag([1.0, -0.5])).check()
    with pytest.raises(NumericalError):
        ch.sqrt_psd(np.diag([1.0, -0.5]))


def test_sqrt_psd_rank_deficient():
    a = ch.ula_response(0.3, 5)
    R = np.outer(a, a.conj())
    S = ch.sqrt_psd(R)
    np.testing.assert_allclose(S @ S, R, atol=1e-12)
    np.testing.assert_allclose(S, S.conj().T, atol=1e-12)


def test_sample_covariance_converges(rng):
    R = ch.corr_2d_one_ring(1.0, 0.3, math.radians(15), 8).R
    h = ch.sample_channel(R, rng, size=200_000)
    S = h.T @ h.conj() / h.shape[0]
    assert np.linalg.norm(S - R) / np.linalg.norm(R) < 0.01
    assert ch.sample_channel(ch.CorrelationMatrix(R), rng).shape == (8,)


def test_correlation_tensor_models():
    cfg = NetworkConfig(L=2, M=16, K=2, tau_c=200, tau_p=2, tau_u=99, tau_d=99)
    d = drop_ues(cfg, Scenario(), 4)
    for model in ("2d", "3d", "los", "iid"):
        R = ch.correlation_tensor(d, 16, model)
        assert R.shape == (2, 2, 2, 16, 16)
        np.testing.assert_allclose(np.einsum("jlkmm->jlk", R).real / 16, d.beta, rtol=1e-10)
    with pytest.raises(ConfigError):
        ch.correlation_tensor(d, 16, "ray-tracing")


@pytest.mark.parametrize("suffix", [".npy", ".csv"])
def test_correlation_dump_roundtrip(tmp_path, rng, suffix):
    Rs = rng.standard_normal((3, 4, 4)) + 1j * rng.standard_normal((3, 4, 4))
    path = tmp_path / f"dump{suffix}"
    ch.dump_correlations(path, Rs)
    np.testing.assert_array_equal(ch.load_correlations(path), Rs)
