"""Graph container shared by the generator, the environment and the models."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    delay: int

    def key(self) -> tuple[int, int]:
        return (self.u, self.v) if self.u < self.v else (self.v, self.u)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected D-regular graph with integer edge delays.

    Edges are stored with `u < v`. Outgoing edges of a node are always
    enumerated by ascending neighbor id; `neighbors[v, k]` is the k-th
    neighbor and `edge_slots[v, k]` the index of the connecting edge.
    """

    num_nodes: int
    degree: int
    positions: np.ndarray
    edges: tuple[Edge, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.degree == other.degree
            and np.array_equal(self.positions, other.positions)
            and self.edges == other.edges
        )

    __hash__ = None

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e.key(): i for i, e in enumerate(self.edges)}

    @cached_property
    def delays(self) -> np.ndarray:
        return np.array([e.delay for e in self.edges], dtype=np.int64)

    @cached_property
    def neighbors(self) -> np.ndarray:
        adj: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for e in self.edges:
            adj[e.u].append(e.v)
            adj[e.v].append(e.u)
        width = max((len(a) for a in adj), default=0)
        out = np.full((self.num_nodes, width), -1, dtype=np.int64)
        for v, nbrs in enumerate(adj):
            nbrs.sort()
            out[v, : len(nbrs)] = nbrs
        return out

    @cached_property
    def edge_slots(self) -> np.ndarray:
        out = np.full_like(self.neighbors, -1)
        for v in range(self.num_nodes):
            for k, w in enumerate(self.neighbors[v]):
                if w >= 0:
                    out[v, k] = self.edge_index[(min(v, w), max(v, w))]
        return out

    def degrees(self) -> np.ndarray:
        return (self.neighbors >= 0).sum(axis=1)

    def edge_id(self, u: int, v: int) -> int:
        return self.edge_index[(min(u, v), max(u, v))]

    def to_networkx(self, delays: np.ndarray | None = None) -> nx.Graph:
        """Return an `nx.Graph` with `delay` edge attributes.

        `delays`, when given, replaces the stored delays (indexed like `edges`).
        """
        g = nx.Graph()
        g.add_nodes_from(range(self.num_nodes))
        for i, e in enumerate(self.edges):
            g.add_edge(e.u, e.v, delay=int(self.delays[i] if delays is None else delays[i]))
        return g

    def with_delays(self, delays: np.ndarray) -> "Graph":
        edges = tuple(Edge(e.u, e.v, int(d)) for e, d in zip(self.edges, delays))
        return Graph(self.num_nodes, self.degree, self.positions.copy(), edges)

    @classmethod
    def from_edges(
        cls,
        num_nodes: int,
        edges: list[tuple[int, int, int]],
        positions: np.ndarray | None = None,
    ) -> "Graph":
        """Build a graph from `(u, v, delay)` triples.

        The degree is taken as the maximum node degree; positions default to
        points on a horizontal line.
        """
        recs = tuple(sorted((Edge(min(u, v), max(u, v), int(d)) for u, v, d in edges), key=Edge.key))
        if positions is None:
            positions = np.column_stack([np.linspace(0.0, 1.0, num_nodes), np.zeros(num_nodes)])
        counts = np.bincount([n for e in recs for n in (e.u, e.v)], minlength=num_nodes)
        return cls(num_nodes, int(counts.max(initial=0)), np.asarray(positions, dtype=np.float64), recs)
