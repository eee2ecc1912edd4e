"""Packet routing environment, observations, masking and baselines."""
from backend.app.routing.config import DelayOverride, EnvConfig
from backend.app.routing.env import EnvState, Observation, PacketTable, RoutingEnv, StepResult
from backend.app.routing.heuristics import ShortestPathPolicy, shortest_path_actions, shortest_path_policy
from backend.app.routing.masking import action_mask, action_masks
from backend.app.routing.metrics import (
    EpisodeMetrics,
    EpisodeTrace,
    aggregate_metrics,
    episode_metrics,
    write_trace_csv,
)
from backend.app.routing.observations import (
    agent_obs_dim,
    agent_observations,
    edge_features,
    node_obs_dim,
    node_observations,
)
from backend.app.routing.policy import Decision, RoutingPolicy, evaluate_policy, run_episode

__all__ = [
    "Decision",
    "DelayOverride",
    "EnvConfig",
    "EnvState",
    "EpisodeMetrics",
    "EpisodeTrace",
    "Observation",
    "PacketTable",
    "RoutingEnv",
    "RoutingPolicy",
    "ShortestPathPolicy",
    "StepResult",
    "action_mask",
    "action_masks",
    "agent_obs_dim",
    "agent_observations",
    "aggregate_metrics",
    "edge_features",
    "episode_metrics",
    "evaluate_policy",
    "node_obs_dim",
    "node_observations",
    "run_episode",
    "shortest_path_actions",
    "shortest_path_policy",
    "write_trace_csv",
]
