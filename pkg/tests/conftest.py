import numpy as np
import pytest

from mdfu.topology import Graph, complete_graph, path_graph, star_graph

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def random_connected_graph(rng: np.random.Generator, n: int, extra: int | None = None) -> Graph:
    """Random recursive tree plus ``extra`` random chords, randomly relabelled."""
    if extra is None:
        extra = int(rng.integers(0, n + 1))
    perm = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        a, b = int(perm[k]), int(perm[rng.integers(0, k)])
        edges.add((min(a, b), max(a, b)))
    cap = n * (n - 1) // 2
    target = min(cap, len(edges) + extra)
    while len(edges) < target:
        a, b = (int(x) for x in rng.choice(n, 2, replace=False))
        edges.add((min(a, b), max(a, b)))
    return Graph(n, tuple(sorted(edges)))


@pytest.fixture
def two_nodes():
    return Graph(2, ((0, 1),))


@pytest.fixture
def path3():
    return path_graph(3)


@pytest.fixture
def k3():
    return complete_graph(3)


@pytest.fixture
def k4():
    return complete_graph(4)


@pytest.fixture
def star5():
    return star_graph(5)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(name: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((name, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
