"""Visited-node action masking for evaluation rollouts."""
from __future__ import annotations

import numpy as np

from backend.app.routing.env import EnvState


def action_mask(state: EnvState, agent: int, strict: bool = False) -> tuple[np.ndarray, bool]:
    """Legal actions of `agent` over `[wait, edge_1, ..., edge_D]` plus a drop signal.

    Edges toward already visited nodes are illegal. A packet about to arrive
    at its edge head is masked as if it were already there. With `strict`,
    waiting is illegal as well. The drop signal is raised when no edge
    action is left.
    """
    g = state.graph
    p = state.packets
    mask = np.zeros(1 + g.degree, dtype=bool)
    if not p.acting()[agent]:
        mask[0] = True
        return mask, False
    mask[0] = not strict
    u = int(p.node[agent])
    visited = set(p.visited[agent])
    visited.add(u)
    nbrs = g.neighbors[u]
    mask[1:] = (nbrs >= 0) & ~np.isin(nbrs, list(visited))
    return mask, not mask[1:].any()


def action_masks(state: EnvState, strict: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Stacked `action_mask` for every agent: `(N, 1 + D)` masks and `(N,)` drops."""
    pairs = [action_mask(state, i, strict) for i in range(len(state.packets.node))]
    return np.stack([m for m, _ in pairs]), np.array([d for _, d in pairs], dtype=bool)
