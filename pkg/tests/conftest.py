import numpy as np
import pytest

from lgcpfusion.grid import GridDomain, ObserverRegistry, SurveyUnit
from lgcpfusion.landscape import desk_landscape


def full_grid(nx, ny=None, cell_size=1.0, origin=(0.0, 0.0)):
    ny = nx if ny is None else ny
    return GridDomain(nx, ny, origin, cell_size, np.ones((ny, nx), dtype=bool))


@pytest.fixture(scope="session")
def desk():
    return desk_landscape()


@pytest.fixture
def grid10():
    return full_grid(10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_observer_registry(d=0.0):
    return ObserverRegistry(np.array([1, 2]), np.array([[0.0, 0.0], [d, 0.0]]), np.array([1, 1]))


def strip_units(grid, n_units):
    """Split the active cells of ``grid`` into ``n_units`` contiguous units."""
    cells = np.array_split(np.arange(grid.n_active), n_units)
    return [SurveyUnit(f"U{k}", c) for k, c in enumerate(cells)]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
