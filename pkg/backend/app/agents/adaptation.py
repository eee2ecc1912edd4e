"""Reaction of learned and shortest-path routing to a delay change mid-episode."""
from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from backend.app.agents.policy import DQNPolicy
from backend.app.agents.qnet import DQNModel
from backend.app.core.errors import UnknownEdgeError
from backend.app.graphs import Graph, find_bottleneck_edge
from backend.app.routing import DelayOverride, EnvConfig, RoutingEnv, ShortestPathPolicy, run_episode
from backend.app.routing.config import Mode

logger = logging.getLogger(__name__)

ADAPTATION_FIELDS = [
    "step",
    "throughput_model",
    "throughput_sp_static",
    "throughput_sp_stepwise",
    "node_state_diff",
    "throughput_model_std",
    "throughput_sp_static_std",
    "throughput_sp_stepwise_std",
    "node_state_diff_std",
]


class AdaptationSeries(BaseModel):
    """Per-step means over the episodes and their standard deviations.

    `change_step` is None for the control run.
    """

    edge: tuple[int, int]
    old_delay: int
    new_delay: int
    change_step: int | None
    episodes: int
    throughput_model: list[float]
    throughput_sp_static: list[float]
    throughput_sp_stepwise: list[float]
    node_state_diff: list[float]
    throughput_model_std: list[float]
    throughput_sp_static_std: list[float]
    throughput_sp_stepwise_std: list[float]
    node_state_diff_std: list[float]


def _edge_index(graph: Graph, edge: int | tuple[int, int] | None) -> int:
    if edge is None:
        return find_bottleneck_edge(graph)
    if isinstance(edge, int):
        if not 0 <= edge < graph.num_edges:
            raise UnknownEdgeError(f"edge index {edge} not in [0, {graph.num_edges})")
        return edge
    key = (min(edge), max(edge))
    if key not in graph.edge_index:
        raise UnknownEdgeError(f"no edge between {edge[0]} and {edge[1]}")
    return graph.edge_index[key]


def _mean(per_episode: list[np.ndarray]) -> list[float]:
    return np.mean(np.stack(per_episode), axis=0).tolist()


def _std(per_episode: list[np.ndarray]) -> list[float]:
    return np.std(np.stack(per_episode), axis=0).tolist()


def adaptation_experiment(
    model: DQNModel,
    graph: Graph,
    edge: int | tuple[int, int] | None = None,
    new_delay: int = 10,
    change_step: int = 50,
    episodes: int = 100,
    episode_len: int = 300,
    mode: Mode = "limited",
    control: bool = False,
    mask: bool = False,
    seed: int = 0,
) -> AdaptationSeries:
    """Throughput of the model and both shortest-path variants around a delay override.

    Without `edge` the bottleneck edge is used. Episode e runs with seed
    `seed + e` for every policy, so the runs share their packet streams.
    With `control` no override is scheduled.
    """
    if episodes < 1:
        raise ValueError(f"episodes must be at least 1, got {episodes}")
    idx = _edge_index(graph, edge)
    target = graph.edges[idx]
    overrides = [] if control else [DelayOverride(edge=idx, delay=new_delay, at_step=change_step)]
    config = EnvConfig(mode=mode, episode_len=episode_len, delay_overrides=overrides)
    learned = DQNPolicy(model, epsilon=0.0, mask=mask, rng=seed)
    policies = {
        "model": learned,
        "sp_static": ShortestPathPolicy("static"),
        "sp_stepwise": ShortestPathPolicy("stepwise"),
    }
    throughput: dict[str, list[np.ndarray]] = {name: [] for name in policies}
    diffs: list[np.ndarray] = []
    env = RoutingEnv(graph, config)
    for e in range(episodes):
        for name, policy in policies.items():
            trace = run_episode(env, policy, seed=seed + e)
            throughput[name].append(trace.arrivals_per_step())
        diffs.append(np.asarray(learned.state_diffs) if learned.state_diffs else np.zeros(episode_len))
    logger.info(
        "adaptation on edge (%d, %d): %d -> %s at step %s over %d episodes",
        target.u,
        target.v,
        target.delay,
        "-" if control else new_delay,
        "-" if control else change_step,
        episodes,
    )
    return AdaptationSeries(
        edge=(target.u, target.v),
        old_delay=target.delay,
        new_delay=target.delay if control else new_delay,
        change_step=None if control else change_step,
        episodes=episodes,
        throughput_model=_mean(throughput["model"]),
        throughput_sp_static=_mean(throughput["sp_static"]),
        throughput_sp_stepwise=_mean(throughput["sp_stepwise"]),
        node_state_diff=_mean(diffs),
        throughput_model_std=_std(throughput["model"]),
        throughput_sp_static_std=_std(throughput["sp_static"]),
        throughput_sp_stepwise_std=_std(throughput["sp_stepwise"]),
        node_state_diff_std=_std(diffs),
    )


def write_adaptation_csv(series: AdaptationSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=ADAPTATION_FIELDS)
        w.writeheader()
        for t in range(len(series.throughput_model)):
            w.writerow({name: t if name == "step" else getattr(series, name)[t] for name in ADAPTATION_FIELDS})
