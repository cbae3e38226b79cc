import numpy as np
import pytest

from kummer_secants.geometry import find_degenerate_secant
from kummer_secants.hierarchy import initial_state, run_hierarchy
from kummer_secants.kummer import config_from_centered
from kummer_secants.theta_core import validate_siegel

OMEGA_1 = [[0.3 + 1.1j]]
OMEGA_2 = [[0.2 + 1.0j, -0.3 + 0.4j], [-0.3 + 0.4j, 0.1 + 1.3j]]
OMEGA_3 = [
    [0.1 + 1.2j, 0.2 + 0.3j, -0.1 + 0.1j],
    [0.2 + 0.3j, -0.2 + 1.1j, 0.15 - 0.2j],
    [-0.1 + 0.1j, 0.15 - 0.2j, 0.3 + 1.4j],
]
SEARCH_SEED = 7


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda x: int(x.split()[1][2:])):
            terminalreporter.write_line(line)


@pytest.fixture
def report_line(request):
    def emit(line):
        print(line)
        request.config._acceptance_lines.append(line)

    return emit


@pytest.fixture(scope="session")
def sm1():
    return validate_siegel(OMEGA_1)


@pytest.fixture(scope="session")
def sm2():
    return validate_siegel(OMEGA_2)


@pytest.fixture(scope="session")
def sm3():
    return validate_siegel(OMEGA_3)


@pytest.fixture(scope="session")
def siegel_by_genus(sm1, sm2, sm3):
    return {1: sm1, 2: sm2, 3: sm3}


@pytest.fixture(scope="session")
def solved_g1(sm1):
    config = config_from_centered([0.21 + 0.13j], [[0.57 - 0.2j]], sm1)
    return run_hierarchy(sm1, config, 8, 1e-8)


@pytest.fixture(scope="session")
def search_g2(sm2):
    return find_degenerate_secant(sm2, m=1, seed=SEARCH_SEED)


@pytest.fixture(scope="session")
def solved_g2(sm2, search_g2):
    return run_hierarchy(sm2, search_g2.config, 5, 1e-6, state=search_g2.state)


@pytest.fixture(scope="session")
def random_g2_state(sm2):
    rng = np.random.default_rng(11)
    u, b = rng.normal(size=2) * 0.3 + 0.2j, rng.normal(size=2) * 0.3 - 0.1j
    return initial_state(sm2, config_from_centered(u, [b], sm2))
