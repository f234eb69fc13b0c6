import numpy as np
import pytest

from multirater_gp.dataset import Dataset
from multirater_gp.linalg import Hyperparameters

# criterion lines recorded by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


def random_instance(rng, n_max=12, r_choices=(1, 2, 3, 5), d_max=3, ragged=False,
                    log_range=(-2.0, 1.0)):
    """Random dataset + hyperparameters for equivalence and gradient checks."""
    n = int(rng.integers(1, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    X = rng.normal(size=(n, d))
    if ragged:
        rows = [rng.integers(0, 11, size=int(rng.choice(r_choices))) for _ in range(n)]
    else:
        rows = rng.integers(0, 11, size=(n, int(rng.choice(r_choices))))
    ds = Dataset(X, rows, 0, 10).centered()
    hp = Hyperparameters.from_array(rng.uniform(*log_range, size=3))
    return ds, hp


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
