"""Shortest-path routing baselines."""
from __future__ import annotations

import logging
from typing import Literal

import numpy as np

from backend.app.graphs import all_pairs_shortest_paths
from backend.app.routing.env import EnvState, RoutingEnv
from backend.app.routing.policy import Decision

logger = logging.getLogger(__name__)

Variant = Literal["static", "stepwise"]


def shortest_path_actions(state: EnvState, dist: np.ndarray, delays: np.ndarray) -> np.ndarray:
    """Next hop of every acting packet along a delay-weighted shortest path.

    The cost of leaving `u` via neighbor `w` is `delay(u, w) + dist[w, dst]`;
    ties go to the smallest neighbor id. Non-acting packets get 0.
    """
    g = state.graph
    p = state.packets
    nbrs = g.neighbors[p.node]
    slots = g.edge_slots[p.node]
    valid = nbrs >= 0
    cost = np.where(
        valid,
        delays[np.where(valid, slots, 0)] + dist[np.where(valid, nbrs, 0), p.dst[:, None]],
        np.inf,
    )
    actions = np.argmin(cost, axis=1) + 1
    actions[~p.acting()] = 0
    return actions


class ShortestPathPolicy:
    """Shortest-path routing on the delays of the episode start (`static`)
    or on the delays in effect at every step (`stepwise`)."""

    def __init__(self, variant: Variant = "static"):
        if variant not in ("static", "stepwise"):
            raise ValueError(f"unknown shortest-path variant {variant!r}")
        self.variant = variant
        self.name = f"sp-{variant}"
        self._delays: np.ndarray | None = None
        self._dist: np.ndarray | None = None

    def _plan(self, env: RoutingEnv) -> None:
        self._delays = env.state.delays.copy()
        self._dist = all_pairs_shortest_paths(env.graph, "delay", self._delays)

    def reset(self, env: RoutingEnv) -> None:
        self._plan(env)

    def decide(self, env: RoutingEnv, observation=None) -> Decision:
        if self.variant == "stepwise" and not np.array_equal(env.state.delays, self._delays):
            logger.debug("step %d: replanning shortest paths", env.state.step)
            self._plan(env)
        return Decision(shortest_path_actions(env.state, self._dist, self._delays))


def shortest_path_policy(env: RoutingEnv, variant: Variant = "static") -> ShortestPathPolicy:
    policy = ShortestPathPolicy(variant)
    policy.reset(env)
    return policy
