from pathlib import Path

import numpy as np
import pytest

from lineuplab.ingest import aggregate_team_season, parse_stints
from lineuplab.model import build_design, build_line_graph, enumerate_generalized

DATA = Path(__file__).parent / "data"
TOY_STINTS = DATA / "toy_stints.csv"
TOY_ROSTER = DATA / "toy_roster.csv"

# full-lineup table of the 3-on-3 toy game, rows in file order
TOY_X = np.array(
    [
        [1, 1, 1, 0, 0],
        [1, 1, 0, 1, 0],
        [0, 0, 1, 1, 1],
        [0, 1, 0, 1, 1],
        [1, 1, 0, 0, 1],
    ],
    dtype=float,
)
TOY_Y = np.array([3, 2, -1, -2, 0], dtype=float)
TOY_W = np.array([180, 180, 120, 60, 60], dtype=float)


@pytest.fixture(scope="session")
def toy_stints():
    return parse_stints(TOY_STINTS, k=3)


@pytest.fixture(scope="session")
def toy_full(toy_stints):
    return aggregate_team_season(toy_stints, "T", "2024")


@pytest.fixture(scope="session")
def toy_ext(toy_stints):
    return enumerate_generalized(toy_stints, 3)


@pytest.fixture(scope="session")
def toy_design(toy_ext):
    return build_design(toy_ext)


@pytest.fixture(scope="session")
def toy_graph(toy_ext):
    return build_line_graph(toy_ext)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
