import numpy as np
import pytest
from hypothesis import settings

from spatial_spillovers import Family

settings.register_profile("default", deadline=None, max_examples=50, derandomize=True)
settings.load_profile("default")

NAMED = {
    "two-region": Family("two-region", phi=0.5, psi=0.8),
    "baseline4": Family("baseline4", phi=0.5, psi=0.7),
    "equidistant4": Family("equidistant4", phi=0.5, psi=0.7),
    "block4": Family("block4", phi=0.5, psi=0.8, psi_prime=0.64),
    "bypass4": Family("bypass4", phi=0.5, psi=0.4225, psi_prime=0.65),
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def benchmark():
    """Symmetric two-region economy at phi=0.5, psi=0.8, sigma=4."""
    return NAMED["two-region"].config()


def random_interior(rng, n, low=0.02):
    x = rng.dirichlet(np.ones(n))
    x = low + (1 - n * low) * x
    return x / x.sum()


@pytest.fixture(scope="session")
def two_region_diagram():
    from spatial_spillovers import DiagramSpec, bifurcation_diagram

    return bifurcation_diagram(DiagramSpec(Family("two-region", psi=0.8)))


@pytest.fixture(scope="session")
def baseline_diagram():
    from spatial_spillovers import DiagramSpec, bifurcation_diagram

    return bifurcation_diagram(DiagramSpec(Family("baseline4", psi=0.7)))


@pytest.fixture(scope="session")
def bypass_diagram():
    from spatial_spillovers import DiagramSpec, bifurcation_diagram

    return bifurcation_diagram(DiagramSpec(Family("bypass4", psi=0.4225, psi_prime=0.65)))


CRITERIA_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
