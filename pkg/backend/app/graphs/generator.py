"""Random fixed-degree geometric graph generation.

Nodes are placed uniformly in the unit square. Edges are added greedily:
the node with the smallest current degree is connected to its closest node
that still has free degree and is not yet adjacent. Placements that get
stuck or end up disconnected are discarded and redrawn.
"""
from __future__ import annotations

import logging

import networkx as nx
import numpy as np
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from backend.app.core.errors import GraphConstructionError, InvalidGraphParameters
from backend.app.graphs.graph import Edge, Graph

logger = logging.getLogger(__name__)

DEFAULT_DELAY_SCALE = 7.0
MAX_PLACEMENTS = 100


class _PlacementFailed(Exception):
    pass


def _check_parameters(num_nodes: int, degree: int, delay_scale: float) -> None:
    if degree < 1:
        raise InvalidGraphParameters(f"degree must be >= 1, got {degree}")
    if num_nodes < degree + 1:
        raise InvalidGraphParameters(f"need at least D+1={degree + 1} nodes, got {num_nodes}")
    if (num_nodes * degree) % 2:
        raise InvalidGraphParameters(f"L*D must be even, got L={num_nodes}, D={degree}")
    if delay_scale <= 0:
        raise InvalidGraphParameters(f"delay_scale must be positive, got {delay_scale}")


def _place_and_connect(
    num_nodes: int, degree: int, delay_scale: float, rng: np.random.Generator
) -> Graph:
    positions = rng.random((num_nodes, 2))
    dist = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
    deg = np.zeros(num_nodes, dtype=np.int64)
    adjacent = np.eye(num_nodes, dtype=bool)
    pairs: list[tuple[int, int]] = []

    while (open_nodes := np.flatnonzero(deg < degree)).size:
        v = int(open_nodes[np.argmin(deg[open_nodes])])
        candidates = open_nodes[~adjacent[v, open_nodes]]
        if candidates.size == 0:
            raise _PlacementFailed(f"node {v} stuck at degree {deg[v]}")
        w = int(candidates[np.argmin(dist[v, candidates])])
        adjacent[v, w] = adjacent[w, v] = True
        deg[v] += 1
        deg[w] += 1
        pairs.append((min(v, w), max(v, w)))

    pairs.sort()
    edges = tuple(
        Edge(u, v, max(1, int(np.rint(delay_scale * dist[u, v])))) for u, v in pairs
    )
    graph = Graph(num_nodes, degree, positions, edges)
    if not nx.is_connected(graph.to_networkx()):
        raise _PlacementFailed("disconnected")
    return graph


def generate_graph(
    num_nodes: int,
    degree: int,
    delay_scale: float = DEFAULT_DELAY_SCALE,
    rng: np.random.Generator | int | None = None,
    max_placements: int = MAX_PLACEMENTS,
) -> Graph:
    """Generate a connected `degree`-regular geometric graph.

    Edge delays are `max(1, round(delay_scale * euclidean distance))`.
    The result is deterministic for a given seed or generator state.
    """
    _check_parameters(num_nodes, degree, delay_scale)
    rng = np.random.default_rng(rng)

    def _log_retry(state) -> None:
        logger.debug("placement %d rejected: %s", state.attempt_number, state.outcome.exception())

    try:
        for attempt in Retrying(
            stop=stop_after_attempt(max_placements),
            retry=retry_if_exception_type(_PlacementFailed),
            after=_log_retry,
        ):
            with attempt:
                graph = _place_and_connect(num_nodes, degree, delay_scale, rng)
    except RetryError as exc:
        logger.warning("no graph with L=%d D=%d after %d placements", num_nodes, degree, max_placements)
        raise GraphConstructionError(
            f"no connected {degree}-regular graph on {num_nodes} nodes "
            f"after {max_placements} placements"
        ) from exc
    return graph


def generate_suite(
    count: int,
    num_nodes: int = 20,
    degree: int = 3,
    delay_scale: float = DEFAULT_DELAY_SCALE,
    seed: int = 0,
    distinct: bool = True,
) -> list[Graph]:
    """Generate `count` graphs from one seeded stream.

    With `distinct`, graphs whose edges and delays repeat an earlier graph
    are redrawn.
    """
    rng = np.random.default_rng(seed)
    graphs: list[Graph] = []
    seen: set[tuple[Edge, ...]] = set()
    redraws = 0
    while len(graphs) < count:
        g = generate_graph(num_nodes, degree, delay_scale, rng)
        if distinct and g.edges in seen:
            redraws += 1
            if redraws > MAX_PLACEMENTS * count:
                raise GraphConstructionError(
                    f"fewer than {count} distinct graphs with L={num_nodes}, D={degree}"
                )
            continue
        seen.add(g.edges)
        graphs.append(g)
        if len(graphs) % 100 == 0:
            logger.info("generated %d/%d graphs", len(graphs), count)
    return graphs


class GraphSampler:
    """Callable graph source drawing a fresh graph from the caller's generator."""

    def __init__(self, num_nodes: int = 20, degree: int = 3, delay_scale: float = DEFAULT_DELAY_SCALE):
        _check_parameters(num_nodes, degree, delay_scale)
        self.num_nodes = num_nodes
        self.degree = degree
        self.delay_scale = delay_scale

    def __call__(self, rng: np.random.Generator) -> Graph:
        return generate_graph(self.num_nodes, self.degree, self.delay_scale, rng)
