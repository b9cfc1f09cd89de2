"""Fixtures shared by the katetov test suite."""
from __future__ import annotations

import pytest

from katetov.engines.structures import (
    FiniteStructure,
    boolean_algebra,
    graph,
    linear_order,
    poset,
    tournament,
)
from katetov.engines.tower import TowerHandle


@pytest.fixture
def k1() -> FiniteStructure:
    return graph(["a"])


@pytest.fixture
def edge() -> FiniteStructure:
    return graph(["a", "b"], [("a", "b")])


@pytest.fixture
def path3() -> FiniteStructure:
    """Path a - b - c."""
    return graph(["a", "b", "c"], [("a", "b"), ("b", "c")])


@pytest.fixture
def graph_tower() -> TowerHandle:
    """Random-graph tower from the empty graph, expanded to level 2 (sizes 0, 1, 3)."""
    t = TowerHandle(graph([]))
    t.expand(2)
    return t


@pytest.fixture
def b1() -> FiniteStructure:
    return boolean_algebra(["a"])


@pytest.fixture
def chain2() -> FiniteStructure:
    return linear_order(["a", "b"])


@pytest.fixture
def v_poset() -> FiniteStructure:
    """a <= c and b <= c."""
    return poset(["a", "b", "c"], [("a", "c"), ("b", "c")])


@pytest.fixture
def cyclic_tournament() -> FiniteStructure:
    return tournament([0, 1, 2], [(0, 1), (1, 2), (2, 0)])
