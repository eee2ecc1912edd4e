"""Rollouts, the DQN training loop and greedy evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from pydantic import BaseModel

from backend.app.agents.config import TrainConfig
from backend.app.agents.dqn import DQNLearner
from backend.app.agents.policy import DQNPolicy
from backend.app.agents.qnet import DQNModel
from backend.app.agents.replay import ReplayMemory, Transition
from backend.app.graphs import Graph, GraphSampler
from backend.app.routing import EnvConfig, EpisodeMetrics, Observation, RoutingEnv, StepResult, evaluate_policy

logger = logging.getLogger(__name__)


class EpisodeReward(BaseModel):
    episode: int
    step: int
    mean_reward: float
    arrivals: int
    epsilon: float


class LossPoint(BaseModel):
    iteration: int
    step: int
    loss: float


@dataclass
class TrainingResult:
    model: DQNModel
    learner: DQNLearner
    replay: ReplayMemory
    episodes: list[EpisodeReward] = field(default_factory=list)
    losses: list[LossPoint] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)


def make_training_env(config: TrainConfig, graph: Graph | None = None, seed: int | None = None) -> RoutingEnv:
    """Fixed-graph environment, or a fresh random graph every episode without `graph`."""
    source = graph if graph is not None else GraphSampler(config.num_nodes, config.degree)
    return RoutingEnv(source, config.env, seed=config.seed if seed is None else seed)


def rollout_step(
    env: RoutingEnv,
    policy: DQNPolicy,
    replay: ReplayMemory,
    observation: Observation,
    episode_start: bool,
) -> StepResult:
    """Act on `observation`, step the environment and store the transition."""
    states = policy.states
    graph = env.graph
    nodes = env.state.packets.node.copy()
    decision = policy.decide(env, observation)
    result = env.step(decision.actions, decision.drops)
    with_graph = policy.model.uses_graph_obs
    replay.push(
        Transition(
            agent_obs=observation.agent_obs,
            actions=decision.actions,
            rewards=result.rewards,
            terminal=result.terminal,
            next_agent_obs=result.observation.agent_obs,
            nodes=nodes,
            next_nodes=env.state.packets.node.copy(),
            episode_start=episode_start,
            h=states.h if with_graph else None,
            c=states.c if with_graph else None,
            node_obs=observation.node_obs if with_graph else None,
            next_node_obs=result.observation.node_obs if with_graph else None,
        ),
        graph,
    )
    return result


def train(
    env: RoutingEnv,
    config: TrainConfig,
    model: DQNModel | None = None,
    checkpoint_dir: str | Path | None = None,
    on_episode: Callable[[EpisodeReward], None] | None = None,
) -> TrainingResult:
    """Epsilon-greedy rollouts with one training iteration every `train_every` steps after warmup."""
    rng = np.random.default_rng(config.seed)
    model = model or DQNModel.from_config(config, rng)
    learner = DQNLearner(model, config, rng)
    replay = ReplayMemory(config.replay_capacity, model.q_params.dtype)
    policy = DQNPolicy(model, epsilon=config.eps_init, rng=rng)
    result = TrainingResult(model=model, learner=learner, replay=replay)
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if checkpoint_dir is not None:
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    observation = env.reset()
    policy.reset(env)
    episode_start = True
    reward_sum, arrivals, episode_steps = 0.0, 0, 0
    for step in range(config.total_steps):
        policy.epsilon = config.epsilon(step)
        out = rollout_step(env, policy, replay, observation, episode_start)
        episode_start = False
        reward_sum += float(out.rewards.sum())
        arrivals += out.arrivals
        episode_steps += 1
        done = step + 1
        if out.truncated:
            record = EpisodeReward(
                episode=len(result.episodes),
                step=done,
                mean_reward=reward_sum / (env.num_agents * episode_steps),
                arrivals=arrivals,
                epsilon=policy.epsilon,
            )
            result.episodes.append(record)
            if on_episode is not None:
                on_episode(record)
            reward_sum, arrivals, episode_steps = 0.0, 0, 0
            observation = env.reset()
            policy.reset(env)
            episode_start = True
        else:
            observation = out.observation

        if done >= config.warmup_steps and done % config.train_every == 0:
            loss = learner.train_batch(replay)
            if loss is not None:
                result.losses.append(LossPoint(iteration=learner.iterations, step=done, loss=loss))
        if done % config.log_every == 0:
            recent = [e.mean_reward for e in result.episodes[-10:]]
            logger.info(
                "step %d/%d eps=%.3f iterations=%d recent_reward=%s loss=%s",
                done,
                config.total_steps,
                policy.epsilon,
                learner.iterations,
                f"{np.mean(recent):.4f}" if recent else "-",
                f"{result.losses[-1].loss:.4f}" if result.losses else "-",
            )
        if checkpoint_dir is not None and config.checkpoint_every and done % config.checkpoint_every == 0:
            path = checkpoint_dir / f"step_{done:08d}.npz"
            model.save(path, config, {"step": done})
            result.checkpoints.append(path)

    if checkpoint_dir is not None:
        path = checkpoint_dir / "final.npz"
        model.save(path, config, {"step": config.total_steps})
        result.checkpoints.append(path)
    return result


def evaluate(
    model: DQNModel,
    graphs: Sequence[Graph],
    env_config: EnvConfig | None = None,
    episodes: int = 1,
    mask: bool = False,
    seed: int = 0,
) -> list[EpisodeMetrics]:
    """Greedy evaluation (epsilon 0), optionally with visited-node masking and drops."""
    policy = DQNPolicy(model, epsilon=0.0, mask=mask, rng=seed)
    if mask:
        policy.name = "dqn-masked"
    return evaluate_policy(policy, graphs, env_config or EnvConfig(), episodes, seed)
