"""Temporal-difference training on replayed sequences.

For a sequence of J stored steps the node states are loaded from the first
slot and recomputed forward with gradients; the target of step j uses the
node states one update further along the successor observation, computed
without gradients, and the target Q-network:

    y_j = r_j + Z_j * gamma * max_a Q_target(o_{j+1} ++ psi''_{j+1}, a)

Z is 0 for agents whose packet left the network at j+1. The squared TD
errors are averaged over batch and agents and summed over the sequence.
Node states restart from zero wherever a sequence crosses into a new
episode.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from backend.app.agents.config import TrainConfig
from backend.app.agents.qnet import DQNModel, QNetwork
from backend.app.agents.replay import ReplayMemory, TransitionBatch
from backend.app.core.errors import NonFiniteLossError
from backend.app.graph_obs import GraphBatch, NodeStates
from backend.app.nn import AdamW, ParamSet, clip_grad_norm

logger = logging.getLogger(__name__)


def soft_update_target(online: ParamSet, target: ParamSet, tau: float) -> None:
    """`target <- tau * online + (1 - tau) * target`, in place."""
    for name, value in target.values.items():
        value *= 1.0 - tau
        value += tau * online.values[name]


def _agent_nodes(batch: GraphBatch, nodes: np.ndarray) -> np.ndarray:
    """Global node of every agent for `(B, N)` local assignments."""
    b, n = nodes.shape
    return batch.global_nodes(np.repeat(np.arange(b), n), nodes.reshape(-1))


def _initial_states(model: DQNModel, first: TransitionBatch) -> NodeStates:
    dtype = model.engine.params.dtype
    d_h = model.engine.hidden_dim
    return NodeStates(first.h.reshape(-1, d_h).astype(dtype), first.c.reshape(-1, d_h).astype(dtype))


def _boundary_keep(tb: TransitionBatch, num_nodes: int, dtype) -> np.ndarray:
    """Per-node factor 0 for sequences starting a new episode at this position."""
    return np.repeat(~tb.episode_start, num_nodes)[:, None].astype(dtype)


def recompute_node_states(model: DQNModel, steps: Sequence[TransitionBatch]) -> list[NodeStates]:
    """Node states entering every position of the sequences, recomputed from the first slot.

    Each sequence runs on its own graph, the way it ran during the rollout,
    so the result matches the stored states bit for bit. Rows are stacked in
    sequence order like `tb.h.reshape(-1, d_h)`.
    """
    engine = model.engine
    dtype = engine.params.dtype
    per_sequence = []
    for b in range(len(steps[0].graphs)):
        states = NodeStates(steps[0].h[b].astype(dtype), steps[0].c[b].astype(dtype))
        seq = []
        for j, tb in enumerate(steps):
            if j > 0 and tb.episode_start[b]:
                states = NodeStates(np.zeros_like(states.h), np.zeros_like(states.c))
            seq.append(states)
            batch = GraphBatch.from_graphs([tb.graphs[b]])
            states, _, _ = engine.node_state_update(states, tb.node_obs[b], batch)
        per_sequence.append(seq)
    stacked = []
    for j in range(len(steps)):
        h = np.concatenate([seq[j].h for seq in per_sequence])
        c = np.concatenate([seq[j].c for seq in per_sequence])
        stacked.append(NodeStates(h, c))
    return stacked


@dataclass
class _StepRecord:
    tape: object
    batch: GraphBatch
    injected: dict
    keep: np.ndarray | None


def sequence_loss(
    model: DQNModel,
    target: QNetwork,
    steps: Sequence[TransitionBatch],
    gamma: float,
    backward: bool = True,
) -> tuple[float, list[float]]:
    """Summed TD loss over the sequence positions in `steps`.

    With `backward`, gradients for the Q-network and the node state update
    are accumulated into their parameter sets (not zeroed).
    """
    engine = model.engine
    dtype = model.q_params.dtype
    states = _initial_states(model, steps[0]) if engine else None
    total, per_step, records = 0.0, [], []
    for j, tb in enumerate(steps):
        b, n = tb.actions.shape
        obs = tb.agent_obs.reshape(b * n, -1).astype(dtype)
        next_obs = tb.next_agent_obs.reshape(b * n, -1).astype(dtype)
        keep = None
        if engine is not None:
            if j > 0:
                keep = _boundary_keep(tb, model.num_nodes, dtype)
                states = NodeStates(states.h * keep, states.c * keep)
            batch = GraphBatch.from_graphs(tb.graphs)
            nodes = _agent_nodes(batch, tb.nodes)
            m = tb.node_obs.reshape(batch.num_nodes, -1)
            states, inter, tape = engine.node_state_update(states, m, batch)
            x = np.concatenate([obs, engine.readout(inter, batch, nodes)], axis=1)
            next_m = tb.next_node_obs.reshape(batch.num_nodes, -1)
            _, next_inter, _ = engine.node_state_update(states, next_m, batch)
            next_psi = engine.readout(next_inter, batch, _agent_nodes(batch, tb.next_nodes))
            next_x = np.concatenate([next_obs, next_psi], axis=1)
        else:
            x, next_x = obs, next_obs
        q, cache = model.qnet.forward(x)
        q_next, _ = target.forward(next_x)
        z = 1.0 - tb.terminal.reshape(-1).astype(dtype)
        y = tb.rewards.reshape(-1) + gamma * z * q_next.max(axis=1)
        rows = np.arange(b * n)
        actions = tb.actions.reshape(-1)
        diff = q[rows, actions] - y
        value = float(np.mean(diff**2))
        total += value
        per_step.append(value)
        if backward:
            dq = np.zeros_like(q)
            dq[rows, actions] = 2.0 * diff / diff.size
            dx = model.qnet.backward(dq, cache)
            if engine is not None:
                injected = engine.readout_backward(dx[:, model.obs_dim :], batch, nodes)
                records.append(_StepRecord(tape, batch, injected, keep))
    if backward and engine is not None:
        dh = dc = None
        for rec in reversed(records):
            dh, dc, _ = engine.step_backward(rec.tape, rec.batch, rec.injected, dh, dc)
            if rec.keep is not None:
                dh, dc = dh * rec.keep, dc * rec.keep
    return total, per_step


class DQNLearner:
    """Owns the online model, the target Q-network and the optimizer."""

    def __init__(self, model: DQNModel, config: TrainConfig, rng: np.random.Generator | int | None = None):
        self.model = model
        self.config = config
        self.rng = np.random.default_rng(config.seed if rng is None else rng)
        self.target_params = ParamSet(model.q_params.dtype)
        self.target = QNetwork(
            self.target_params, model.qnet.in_dim, model.qnet.num_actions, model.q_hidden, np.random.default_rng(0)
        )
        self.target_params.assign(model.q_params)
        self.optimizer = AdamW(model.param_sets, lr=config.lr, weight_decay=config.weight_decay)
        self.iterations = 0

    @property
    def sequence_length(self) -> int:
        return self.config.unroll if self.model.uses_graph_obs else 1

    def sample(self, replay: ReplayMemory) -> list[TransitionBatch] | None:
        length = self.sequence_length
        if not replay.can_sample(length):
            return None
        slots = replay.sample_sequences(self.config.batch_size, length, self.rng)
        return [replay.gather(slots[:, j]) for j in range(length)]

    def train_batch(self, replay: ReplayMemory) -> float | None:
        """One optimizer step on a sampled batch; None while the replay is too short."""
        steps = self.sample(replay)
        if steps is None:
            return None
        self.optimizer.zero_grad()
        loss, per_step = sequence_loss(self.model, self.target, steps, self.config.gamma)
        if not np.isfinite(loss):
            raise NonFiniteLossError(
                "TD loss is not finite",
                {
                    "iteration": self.iterations + 1,
                    "per_step": per_step,
                    "grad_norm": sum(p.grad_norm() for p in self.model.param_sets),
                },
            )
        clip_grad_norm(self.model.param_sets, self.config.grad_clip)
        self.optimizer.step()
        soft_update_target(self.model.q_params, self.target_params, self.config.tau)
        self.iterations += 1
        return loss
