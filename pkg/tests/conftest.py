import numpy as np
import pytest

from d2orient.grid import build_candidate_tables


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def full_table():
    """The default-size search table (K=1200, L=72, 360 rays)."""
    return build_candidate_tables(1200, 72, 360)


@pytest.fixture(scope="session")
def desk_table():
    """The desk-size search table (K=200, L=24, 360 rays)."""
    return build_candidate_tables(200, 24, 360)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
