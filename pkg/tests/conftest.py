import numpy as np
import pytest

from cdnoma import kernels

# criterion number -> (passed, detail), filled by tests/test_acceptance.py
ACCEPTANCE = {}


def record(num, passed, detail):
    ACCEPTANCE[num] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


BACKENDS = [("python", kernels.python)]
if kernels.compiled is not None:
    BACKENDS.append(("compiled", kernels.compiled))


@pytest.fixture(params=BACKENDS, ids=[b[0] for b in BACKENDS])
def backend(request):
    return request.param[1]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_psd(rng, M, rank=None, scale=1.0):
    r = M if rank is None else rank
    A = rng.standard_normal((M, r)) + 1j * rng.standard_normal((M, r))
    R = A @ A.conj().T / r
    return scale * R * (M / np.trace(R).real)
