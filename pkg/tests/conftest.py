import numpy as np
import pytest

from resgcn.graph import AttributedGraph
from resgcn.synthetic import random_graph


def dense_normalized(adj: np.ndarray) -> np.ndarray:
    """Straight dense D~^-1/2 (A + I) D~^-1/2, the oracle for the sparse path."""
    a = adj + np.eye(adj.shape[0])
    dinv = np.diag(1.0 / np.sqrt(a.sum(axis=1)))
    return dinv @ a @ dinv


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_graph(rng):
    return random_graph(20, 60, 8, rng)


@pytest.fixture
def path2():
    return AttributedGraph.from_edges(2, [(0, 1)], np.zeros((2, 1)))


@pytest.fixture
def triangle():
    return AttributedGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)], np.arange(6.0).reshape(3, 2))


# one "PASS|FAIL name: detail" line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def report(name, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
