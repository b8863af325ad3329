import numpy as np
import pytest

from su4squeeze.dynamics import cached_hamiltonian, initial_state
from su4squeeze.fock_basis import enumerate_basis

ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    """Remember an acceptance outcome and print its one-line verdict."""
    ACCEPTANCE[number] = (passed, detail)
    return f"CRITERION {number}: {'PASS' if passed else 'FAIL'} | {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def evolved(n, t, picture="lab"):
    psi0 = initial_state(enumerate_basis(n))
    return psi0.with_amplitudes(cached_hamiltonian(n, picture).spectral.expm(psi0.amplitudes, t))


def random_state(n, rng):
    from su4squeeze.dynamics import StateVector
    dim = enumerate_basis(n).dim
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return StateVector(n, v / np.linalg.norm(v))


@pytest.fixture(scope="session")
def scheme_a_n20():
    """The default two-parameter run: N=20, M=5000, phi3=phi5=pi/16, 20 seeds."""
    from su4squeeze.interferometry import SchemeConfig, two_parameter_scheme
    cfg = SchemeConfig(n_atoms=20, n_measurements=5000, n_seeds=20)
    return two_parameter_scheme(cfg)
