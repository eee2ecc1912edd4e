"""Disjoint union of graphs with global node indices."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from backend.app.graphs import Graph


@dataclass(frozen=True)
class GraphBatch:
    """Neighbor table over the concatenated nodes of several graphs.

    `neighbors[v]` lists global neighbor indices in ascending id order;
    missing slots are -1. `offsets[g]` is the first global index of graph g.
    """

    neighbors: np.ndarray
    offsets: np.ndarray

    @classmethod
    def from_graphs(cls, graphs: Sequence[Graph]) -> "GraphBatch":
        width = max(g.neighbors.shape[1] for g in graphs)
        blocks, offsets, start = [], [], 0
        for g in graphs:
            nbrs = np.full((g.num_nodes, width), -1, dtype=np.int64)
            local = g.neighbors
            nbrs[:, : local.shape[1]] = np.where(local >= 0, local + start, -1)
            blocks.append(nbrs)
            offsets.append(start)
            start += g.num_nodes
        return cls(np.concatenate(blocks), np.array(offsets, dtype=np.int64))

    @classmethod
    def single(cls, graph: Graph) -> "GraphBatch":
        return cls.from_graphs([graph])

    @property
    def num_nodes(self) -> int:
        return self.neighbors.shape[0]

    @property
    def degree(self) -> int:
        return self.neighbors.shape[1]

    def global_nodes(self, graph_index: np.ndarray, nodes: np.ndarray) -> np.ndarray:
        return self.offsets[np.asarray(graph_index)] + np.asarray(nodes)
