"""Agent and node observation vectors.

Both share a per-outgoing-edge block, ordered by ascending neighbor id:
`[delay / delay_norm, edge load, one-hot(neighbor id)]`. Missing edge slots
on irregular graphs are zero.
"""
from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from backend.app.routing.config import EnvConfig
    from backend.app.routing.env import EnvState


def agent_obs_dim(num_nodes: int, degree: int) -> int:
    return 2 * num_nodes + 1 + degree * (num_nodes + 2)


def node_obs_dim(num_nodes: int, degree: int) -> int:
    return num_nodes + 2 + degree * (num_nodes + 2)


def edge_features(state: "EnvState", config: "EnvConfig") -> np.ndarray:
    """`(L, D * (L + 2))` outgoing-edge block of every node."""
    g = state.graph
    num_nodes, degree = g.num_nodes, g.degree
    out = np.zeros((num_nodes, degree, num_nodes + 2))
    vs, ks = np.nonzero(g.edge_slots >= 0)
    edges = g.edge_slots[vs, ks]
    out[vs, ks, 0] = state.delays[edges] / config.delay_norm
    out[vs, ks, 1] = state.edge_load[edges]
    out[vs, ks, 2 + g.neighbors[vs, ks]] = 1.0
    return out.reshape(num_nodes, -1)


def agent_observations(state: "EnvState", config: "EnvConfig", edges: np.ndarray | None = None) -> np.ndarray:
    """`(N, 2L + 1 + D(L + 2))`: position, destination, size, edges of the position.

    An in-transit packet observes the head of its edge as its position.
    """
    g = state.graph
    p = state.packets
    n = len(p.node)
    num_nodes = g.num_nodes
    if edges is None:
        edges = edge_features(state, config)
    out = np.zeros((n, agent_obs_dim(num_nodes, g.degree)))
    rows = np.arange(n)
    out[rows, p.node] = 1.0
    out[rows, num_nodes + p.dst] = 1.0
    out[:, 2 * num_nodes] = p.size
    out[:, 2 * num_nodes + 1 :] = edges[p.node]
    return out


def node_observations(state: "EnvState", config: "EnvConfig", edges: np.ndarray | None = None) -> np.ndarray:
    """`(L, L + 2 + D(L + 2))`: own id, resident packet count / N, resident size, edges."""
    g = state.graph
    p = state.packets
    num_nodes = g.num_nodes
    if edges is None:
        edges = edge_features(state, config)
    resident = ~p.in_transit()
    out = np.zeros((num_nodes, node_obs_dim(num_nodes, g.degree)))
    out[:, :num_nodes] = np.eye(num_nodes)
    out[:, num_nodes] = np.bincount(p.node[resident], minlength=num_nodes) / len(p.node)
    out[:, num_nodes + 1] = np.bincount(p.node[resident], weights=p.size[resident], minlength=num_nodes)
    out[:, num_nodes + 2 :] = edges
    return out
