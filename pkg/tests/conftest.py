import numpy as np
import pytest
from hypothesis import settings

from nsgfb.graph import complete_graph, cycle_graph, generate_rgg, path_graph

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def p3():
    return path_graph(3)


@pytest.fixture(scope="session")
def p5():
    return path_graph(5)


@pytest.fixture(scope="session")
def k4():
    return complete_graph(4)


@pytest.fixture(scope="session")
def c3():
    return cycle_graph(3)


@pytest.fixture(scope="session")
def rgg64():
    return generate_rgg(64, 7, connect="resample")


@pytest.fixture(scope="session")
def rgg256():
    return generate_rgg(256, 0, connect="resample")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
