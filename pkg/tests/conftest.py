import numpy as np
import pytest

from cone.graph import build_graph


@pytest.fixture
def triangle():
    return build_graph([("a", "b"), ("b", "c"), ("a", "c")])


@pytest.fixture
def star4():
    return build_graph([("h", f"l{i}") for i in range(4)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_graph(rng, n, p=0.2, directed=False):
    """Random weighted graph over ``n`` declared nodes."""
    edges = []
    for i in range(n):
        for j in range(n) if directed else range(i + 1, n):
            if i != j and rng.random() < p:
                edges.append((i, j, float(rng.uniform(0.5, 2.0))))
    return build_graph(edges, directed=directed, nodes=range(n))


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
