import numpy as np
import pytest

from activescalar.evolution import TimeGrid
from activescalar.geometry import Window
from activescalar.spectral import FourierLattice, MultiplierSpec

# criterion id -> one-line verdict, filled by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[cid])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def lat32():
    return FourierLattice(32)


@pytest.fixture(scope="session")
def lat64():
    return FourierLattice(64)


@pytest.fixture(scope="session")
def grid_small():
    return TimeGrid(0.5, 100)


@pytest.fixture(scope="session")
def window():
    return Window((0.0, 0.0), 0.1)


@pytest.fixture(scope="session")
def riesz():
    return MultiplierSpec.riesz()


@pytest.fixture(scope="session")
def perturbed():
    return MultiplierSpec.perturbed()
