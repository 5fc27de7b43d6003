import numpy as np
import pytest

from cubeagent.cube import apply_algorithm, identity
from cubeagent.solver import engine, scramble


@pytest.fixture(scope="session")
def tables_ready():
    # loads (or builds) the pruning tables and compiles the search kernels once
    return engine()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def scrambled(seed, length=25):
    return apply_algorithm(identity(), scramble(seed, length))


# PASS/FAIL lines from the acceptance criteria, echoed in the terminal summary
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
