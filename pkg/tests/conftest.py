import numpy as np
import pytest

from searchlight.characterization import LossParams
from searchlight.grid import CellBelief, ScenarioGrid, uniform_counts
from searchlight.sensors import CharSensorModel, SearchSensorModel

REGIONS = {
    "A1": [1.0, 0.0, 0.0],
    "A2": [0.15, 0.20, 0.65],
    "A3": [0.40, 0.30, 0.30],
    "A4": [0.15, 0.80, 0.05],
    "A5": [0.05, 0.05, 0.90],
}


@pytest.fixture(scope="session")
def search_sensor():
    return SearchSensorModel((0.65, 0.8, 0.95), (0.4, 0.3, 0.05))


@pytest.fixture(scope="session")
def char_sensor():
    return CharSensorModel.symmetric((0.9, 0.92, 0.94))


@pytest.fixture(scope="session")
def loss():
    return LossParams(1.0, 3.0)


def random_grid(rng, n_rows, n_cols, n_envs=3, max_count=2):
    """Grid whose cells draw environment beliefs from a Dirichlet, with some point masses."""
    cells = []
    for _ in range(n_rows * n_cols):
        env = rng.dirichlet(np.ones(n_envs))
        if rng.random() < 0.15:
            env = np.eye(n_envs)[rng.integers(n_envs)]
        cells.append(CellBelief(env, uniform_counts(max_count)))
    return ScenarioGrid(n_rows, n_cols, tuple(cells))


def region_grid(rows):
    """Grid from rows of region labels using the five standard regions."""
    labels = [lab for row in rows for lab in row]
    cells = tuple(CellBelief(REGIONS[lab], uniform_counts(2)) for lab in labels)
    return ScenarioGrid(len(rows), len(rows[0]), cells, tuple(labels))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
