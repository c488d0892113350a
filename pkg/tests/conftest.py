import numpy as np
import pytest

from qlyapunov.states import as_density

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_density(n, rng, rank=None):
    """Random full-rank (or given rank) density matrix."""
    k = rank or n
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    rho = g @ g.conj().T
    return as_density(rho / np.trace(rho).real)


def random_hermitian(n, rng, scale=1.0):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (g + g.conj().T)


def random_ideal_pair(n, rng):
    """Diagonal strongly regular drift and a fully connected Hermitian control."""
    from qlyapunov.states import is_strongly_regular

    while True:
        h0 = np.diag(np.sort(rng.uniform(0.0, 3.0, n))).astype(complex)
        if is_strongly_regular(h0, tol=0.05).ok:
            break
    h1 = random_hermitian(n, rng)
    for k in range(n):
        for l in range(k + 1, n):
            if abs(h1[k, l]) < 0.2:
                h1[k, l] = 0.5
                h1[l, k] = 0.5
    return h0, h1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
