import numpy as np
import pytest

from speclab import grid as gp
from speclab.eigen import build_hamiltonian, eigenpairs_below, subspace_for


@pytest.fixture(scope="session")
def ho():
    return gp.harmonic()


@pytest.fixture(scope="session")
def ho12(ho):
    """Harmonic oscillator on L=12, n=4801, eigenpairs below 20 (ten levels)."""
    return eigenpairs_below(build_hamiltonian(ho, gp.make_grid(12.0, 4801)), 20.0)


@pytest.fixture(scope="session")
def ho400(ho):
    """Harmonic oscillator, automatic grid, all levels below 400."""
    return subspace_for(ho, 400.0)


@pytest.fixture(scope="session")
def ho_small(ho):
    """Coarse harmonic oscillator box for cheap lift and property tests."""
    return eigenpairs_below(build_hamiltonian(ho, gp.make_grid(8.0, 801)), 12.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_LINES = []


@pytest.fixture(scope="session")
def criterion():
    """``criterion(n, ok, detail)`` prints and records one acceptance line."""
    def note(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)
        return ok
    return note


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
