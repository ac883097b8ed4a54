import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from latfrac.lattice import LatticeSpec, Potential, assemble_hamiltonian
from latfrac.spectral import eigendecompose

settings.register_profile("latfrac", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("latfrac")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def harmonic(n=1):
    coeffs = {tuple([0] * n): 1.0}
    for j in range(n):
        e = [0] * n
        e[j] = 2
        coeffs[tuple(e)] = 1.0
    return Potential.polynomial(coeffs)


@pytest.fixture(scope="session")
def dec_small():
    """n=1, hbar=0.5, R=10 with V = 1 + x^2."""
    spec = LatticeSpec(1, 0.5, 10)
    return eigendecompose(assemble_hamiltonian(spec, harmonic()))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
