import pytest

from lmwishart.graph_core import Dag, UndirectedGraph, derive_order

ACCEPTANCE = {}

CE1_EDGES = [(1, 2), (2, 3), (2, 4), (2, 5), (3, 5), (4, 5), (4, 6)]
CE1_ORDER = [{2, 3, 5}, {2, 4, 5}, {1, 2}, {4, 6}]
CE2_ARCS = [(7, 4), (8, 4), (8, 7), (7, 3), (8, 3), (8, 6), (5, 2), (6, 2), (6, 5), (5, 1), (6, 1)]
CE2_ORDER = [{4, 7, 8}, {3, 7, 8}, {6, 8}, {2, 5, 6}, {1, 5, 6}]


@pytest.fixture
def path4():
    return UndirectedGraph.path(4)


@pytest.fixture
def ce1():
    g = UndirectedGraph(range(1, 7), CE1_EDGES)
    return g, derive_order(g, CE1_ORDER)


@pytest.fixture
def ce2():
    d = Dag(range(1, 9), CE2_ARCS)
    g = d.skeleton()
    return g, derive_order(g, CE2_ORDER), d


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {msg}")
