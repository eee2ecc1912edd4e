"""Policy interface and the episode runner shared by baselines and learned agents."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from backend.app.graphs import Graph
from backend.app.routing.config import EnvConfig
from backend.app.routing.env import Observation, RoutingEnv, StepResult
from backend.app.routing.metrics import EpisodeMetrics, EpisodeTrace, episode_metrics

logger = logging.getLogger(__name__)


@dataclass
class Decision:
    actions: np.ndarray
    drops: np.ndarray | None = None


@runtime_checkable
class RoutingPolicy(Protocol):
    name: str

    def reset(self, env: RoutingEnv) -> None:
        ...

    def decide(self, env: RoutingEnv, observation: Observation) -> Decision:
        ...


def run_episode(
    env: RoutingEnv,
    policy: RoutingPolicy,
    seed: int | None = None,
    on_step: Callable[[StepResult], None] | None = None,
) -> EpisodeTrace:
    """Roll `policy` for one episode of `env.config.episode_len` steps."""
    observation = env.reset(seed)
    policy.reset(env)
    trace = EpisodeTrace(num_agents=env.num_agents)
    while True:
        decision = policy.decide(env, observation)
        step = env.state.step
        result = env.step(decision.actions, decision.drops)
        trace.record(step, decision.actions, result)
        if on_step is not None:
            on_step(result)
        observation = result.observation
        if result.truncated:
            break
    trace.unarrived = env.unarrived_initial_packets()
    return trace


def evaluate_policy(
    policy: RoutingPolicy,
    graphs: Sequence[Graph],
    config: EnvConfig | None = None,
    episodes: int = 1,
    seed: int = 0,
) -> list[EpisodeMetrics]:
    """Metrics of `episodes` runs on every graph.

    The k-th episode overall is seeded with `seed + k`, so policies
    evaluated with the same arguments see the same packet streams.
    """
    config = config or EnvConfig()
    out = []
    for g_idx, graph in enumerate(graphs):
        env = RoutingEnv(graph, config)
        for e in range(episodes):
            trace = run_episode(env, policy, seed=seed + g_idx * episodes + e)
            out.append(episode_metrics(trace))
    logger.info("%s: evaluated %d episodes on %d graphs", policy.name, len(out), len(graphs))
    return out
