"""Shared pytest fixtures: small hand-built graphs and seeded generators."""
from __future__ import annotations

import numpy as np
import pytest

from backend.app.graphs import Graph, generate_graph


@pytest.fixture
def path_graph() -> Graph:
    # a=0 -(2)- b=1 -(3)- c=2
    return Graph.from_edges(3, [(0, 1, 2), (1, 2, 3)])


@pytest.fixture
def k4() -> Graph:
    return Graph.from_edges(4, [(u, v, 1) for u in range(4) for v in range(u + 1, 4)])


@pytest.fixture
def ring6() -> Graph:
    # 6-cycle plus long chords: 3-regular, two routes between opposite nodes
    return Graph.from_edges(
        6,
        [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (4, 5, 1), (5, 0, 1), (0, 3, 5), (1, 4, 5), (2, 5, 5)],
    )


@pytest.fixture
def graph20() -> Graph:
    return generate_graph(20, 3, rng=np.random.default_rng(7))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
