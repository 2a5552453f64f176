import numpy as np
import pytest

from portarb.milp import build_day_instance
from portarb.solver import oracle_solve, solve_lp, solve_milp
from portarb.testing import random_case

SUITE_SIZE = 100
SUITE_SEED = 20180417

# criterion lines collected by the acceptance module, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class Solved:
    """One random instance with its native MILP, LP relaxation and oracle results."""

    def __init__(self, case):
        self.case = case
        self.instance = build_day_instance(*case.args())
        self.milp = solve_milp(self.instance)
        self.lp = solve_lp(self.instance)
        self.oracle = oracle_solve(*case.args())


@pytest.fixture(scope="session")
def random_suite():
    rng = np.random.default_rng(SUITE_SEED)
    return [Solved(random_case(rng)) for _ in range(SUITE_SIZE)]


@pytest.fixture
def rng():
    return np.random.default_rng(7)
