import numpy as np
import pytest

from quarticdual.problems import QpInstance, QqInstance, QuadraticForm
from quarticdual.solver import QpState, QqState


def spd(rng, n, shift=0.5):
    G = rng.standard_normal((n, n))
    return G @ G.T / n + shift * np.eye(n)


def sym(rng, n):
    G = rng.standard_normal((n, n))
    return 0.5 * (G + G.T)


def form(rng, A):
    n = A.shape[0]
    return QuadraticForm(A, rng.standard_normal(n), float(rng.standard_normal()))


def random_qp_instance(rng, n):
    return QpInstance(form(rng, sym(rng, n)), form(rng, spd(rng, n)))


def random_qq_instance(rng, n):
    return QqInstance(form(rng, spd(rng, n)), form(rng, sym(rng, n)))


def interior_pair(rng, n):
    """SPD (U, W) with (WU + UW)/2 positive definite: U is a small symmetric
    perturbation of a polynomial in W."""
    W = spd(rng, n)
    while True:
        U = 0.5 * W + np.eye(n) + 0.05 * sym(rng, n)
        S = 0.5 * (W @ U + U @ W)
        if np.linalg.eigvalsh(U)[0] > 0 and np.linalg.eigvalsh(S)[0] > 0:
            return U, W


def random_qp_state(rng, n):
    """Interior state: arbitrary x and sigma, (U, W) from :func:`interior_pair`."""
    U, W = interior_pair(rng, n)
    return QpState(rng.standard_normal(n), float(rng.uniform(0.5, 3.0)), U, W)


def random_qq_state(rng, n):
    U, W = interior_pair(rng, n)
    return QqState(
        rng.standard_normal(n), float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.5, 3.0)),
        float(rng.uniform(0.1, 2.0)), U, W,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def qp_hand():
    """min (x + 1)**2 - 1 + (x**2 - 1)**2 in one variable: x* = -1, f* = -1."""
    return QpInstance(QuadraticForm([[1.0]], [1.0], 0.0), QuadraticForm([[1.0]], [0.0], -1.0))


@pytest.fixture
def qp_hand_origin():
    """min 2 x**2 + (x**2 - 1)**2: global minimizer x = 0 with f = 1."""
    return QpInstance(QuadraticForm([[2.0]], [0.0], 0.0), QuadraticForm([[1.0]], [0.0], -1.0))


@pytest.fixture
def qq_hand():
    """min (x**2 - 1)**2 s.t. x**2 >= 4: x = +-2, f = 9, sigma = lam = 6."""
    return QqInstance(
        QuadraticForm([[1.0]], [0.0], -1.0), QuadraticForm([[-1.0]], [0.0], 4.0),
        slater_point=[3.0],
    )



ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
