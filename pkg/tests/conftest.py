import numpy as np
import pytest

from dualenkf import SystemModel, random_stable, scalar_benchmark


@pytest.fixture
def scalar():
    return scalar_benchmark()


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


def random_psd(rng, n, rank=None):
    L = rng.standard_normal((n, rank or n))
    return L @ L.T


def random_model(rng, n, m, rho=0.9, diag_R=True):
    A = rng.standard_normal((n, n))
    A *= rho / max(abs(np.linalg.eigvals(A)))
    H = rng.standard_normal((m, n))
    Q = random_psd(rng, n) * 0.2
    R = np.diag(rng.uniform(0.5, 2.0, m)) if diag_R else random_psd(rng, m) + 0.5 * np.eye(m)
    return SystemModel(A=A, H=H, Q=Q, R=R, m0=rng.standard_normal(n), Sigma0=random_psd(rng, n) + 0.1 * np.eye(n))


@pytest.fixture(params=[(2, 1), (3, 2), (4, 3)], ids=lambda p: f"n{p[0]}m{p[1]}")
def small_model(request, rng):
    n, m = request.param
    return random_model(rng, n, m)


@pytest.fixture
def stable3():
    return random_stable(3, 2, rho=0.95, seed=3)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
