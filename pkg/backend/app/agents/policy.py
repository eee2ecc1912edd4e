"""Epsilon-greedy action selection and the learned routing policy."""
from __future__ import annotations

import logging

import numpy as np

from backend.app.agents.qnet import DQNModel
from backend.app.core.errors import NoLegalActionError
from backend.app.graph_obs import GraphBatch, NodeStates
from backend.app.routing import Decision, Observation, RoutingEnv, action_masks

logger = logging.getLogger(__name__)


def act(
    q: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
    mask: np.ndarray | None = None,
) -> int:
    """Random legal action with probability `epsilon`, else the legal argmax.

    Ties go to the smallest action index.
    """
    legal = np.arange(len(q)) if mask is None else np.flatnonzero(mask)
    if legal.size == 0:
        raise NoLegalActionError("no legal action left")
    if rng.random() < epsilon:
        return int(rng.choice(legal))
    return int(legal[np.argmax(q[legal])])


class DQNPolicy:
    """Shared-parameter Q-learning agents acting on `o` or `o ++ psi`.

    Node states advance once per `decide` call and restart from zero on
    `reset`. With `mask`, edges toward visited nodes are illegal and a
    packet with no edge left is dropped.
    """

    name = "dqn"

    def __init__(
        self,
        model: DQNModel,
        epsilon: float = 0.0,
        mask: bool = False,
        rng: np.random.Generator | int | None = None,
    ):
        self.model = model
        self.epsilon = epsilon
        self.mask = mask
        self.rng = np.random.default_rng(rng)
        self.states: NodeStates | None = None
        self.state_diffs: list[float] = []
        self._batch: GraphBatch | None = None
        self._graph = None

    def reset(self, env: RoutingEnv) -> None:
        self.states = self.model.initial_states()
        self.state_diffs = []
        self._graph = None

    def _graph_batch(self, env: RoutingEnv) -> GraphBatch:
        if env.graph is not self._graph:
            self._graph = env.graph
            self._batch = GraphBatch.single(env.graph)
        return self._batch

    def decide(self, env: RoutingEnv, observation: Observation) -> Decision:
        nodes = env.state.packets.node
        batch = self._graph_batch(env) if self.model.uses_graph_obs else None
        x, new_states = self.model.q_input(observation.agent_obs, self.states, observation.node_obs, batch, nodes)
        if new_states is not None:
            self.state_diffs.append(new_states.mean_abs_diff(self.states))
            self.states = new_states
        q = self.model.q_values(x)
        n = len(q)
        actions = np.zeros(n, dtype=np.int64)
        if not self.mask:
            for i in range(n):
                actions[i] = act(q[i], self.epsilon, self.rng)
            return Decision(actions)
        masks, drops = action_masks(env.state)
        for i in range(n):
            if not drops[i]:
                actions[i] = act(q[i], self.epsilon, self.rng, masks[i])
        return Decision(actions, drops)
