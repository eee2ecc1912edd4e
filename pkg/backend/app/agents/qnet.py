"""Shared Q-network and the model bundle used by every agent."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from backend.app.agents.config import TrainConfig
from backend.app.core.errors import CheckpointError, ShapeMismatchError
from backend.app.graph_obs import GraphBatch, GraphObsConfig, NodeStates, RecurrentMessagePassing
from backend.app.nn import DenseStack, Linear, ParamSet, load_checkpoint, save_checkpoint
from backend.app.routing import agent_obs_dim, node_obs_dim

logger = logging.getLogger(__name__)


class QNetwork:
    """Dense encoder with Leaky ReLU followed by a linear layer onto D + 1 actions."""

    def __init__(
        self,
        params: ParamSet,
        in_dim: int,
        num_actions: int,
        hidden: Sequence[int],
        rng: np.random.Generator,
    ):
        self.in_dim = in_dim
        self.num_actions = num_actions
        self.encoder = DenseStack(params, "q_enc", [in_dim, *hidden], rng)
        self.out = Linear(params, "q_out", hidden[-1], num_actions, rng)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatchError(f"Q-network expects (n, {self.in_dim}) inputs, got {x.shape}")
        z, enc_caches = self.encoder.forward(x)
        q, out_cache = self.out.forward(z)
        return q, (enc_caches, out_cache)

    def backward(self, dq: np.ndarray, cache: tuple) -> np.ndarray:
        enc_caches, out_cache = cache
        return self.encoder.backward(self.out.backward(dq, out_cache), enc_caches)


class DQNModel:
    """Q-network plus the optional message passing engine feeding it.

    Without graph observations the Q-network sees the agent observation
    only; otherwise its input is `o ++ psi`.
    """

    def __init__(
        self,
        num_nodes: int,
        degree: int,
        use_graph_obs: bool = True,
        graph_obs: GraphObsConfig | None = None,
        q_hidden: Sequence[int] = (512, 256),
        rng: np.random.Generator | int | None = None,
        dtype=np.float32,
    ):
        rng = np.random.default_rng(rng)
        self.num_nodes = num_nodes
        self.degree = degree
        self.obs_dim = agent_obs_dim(num_nodes, degree)
        self.q_hidden = tuple(q_hidden)
        self.engine: RecurrentMessagePassing | None = None
        if use_graph_obs:
            self.engine = RecurrentMessagePassing(node_obs_dim(num_nodes, degree), degree, graph_obs, rng, dtype)
        psi_dim = self.engine.readout_dim if self.engine else 0
        self.q_params = ParamSet(dtype)
        self.qnet = QNetwork(self.q_params, self.obs_dim + psi_dim, degree + 1, self.q_hidden, rng)

    @classmethod
    def from_config(cls, config: TrainConfig, rng: np.random.Generator | int | None = None, dtype=np.float32):
        return cls(
            config.num_nodes,
            config.degree,
            config.use_graph_obs,
            config.graph_obs,
            config.q_hidden,
            rng=config.seed if rng is None else rng,
            dtype=dtype,
        )

    @property
    def uses_graph_obs(self) -> bool:
        return self.engine is not None

    @property
    def param_sets(self) -> list[ParamSet]:
        if self.engine is None:
            return [self.q_params]
        return [self.q_params, self.engine.params]

    def initial_states(self) -> NodeStates | None:
        return self.engine.initial_states(self.num_nodes) if self.engine else None

    def q_input(
        self,
        agent_obs: np.ndarray,
        states: NodeStates | None,
        node_obs: np.ndarray | None,
        batch: GraphBatch | None,
        nodes: np.ndarray | None,
    ) -> tuple[np.ndarray, NodeStates | None]:
        """Q-network input for the agents at global `nodes`, without gradient bookkeeping.

        Returns the input and the advanced node states (None without graph
        observations).
        """
        agent_obs = agent_obs.astype(self.q_params.dtype, copy=False)
        if self.engine is None:
            return agent_obs, None
        new_states, inter, _ = self.engine.node_state_update(states, node_obs, batch)
        psi = self.engine.readout(inter, batch, nodes)
        return np.concatenate([agent_obs, psi], axis=1), new_states

    def q_values(self, x: np.ndarray) -> np.ndarray:
        return self.qnet.forward(x)[0]

    def save(self, path: str | Path, config: TrainConfig | None = None, extra: dict | None = None) -> None:
        groups = {"q": self.q_params}
        if self.engine is not None:
            groups["node_update"] = self.engine.params
        meta = {
            "num_nodes": self.num_nodes,
            "degree": self.degree,
            "use_graph_obs": self.uses_graph_obs,
            "graph_obs": self.engine.config.model_dump(mode="json") if self.engine else None,
            "q_hidden": list(self.q_hidden),
            "train_config": config.model_dump(mode="json") if config else None,
            **(extra or {}),
        }
        save_checkpoint(path, groups, meta)
        logger.info("checkpoint written to %s", path)

    @classmethod
    def load(cls, path: str | Path) -> "DQNModel":
        groups, meta = load_checkpoint(path)
        try:
            model = cls(
                meta["num_nodes"],
                meta["degree"],
                meta["use_graph_obs"],
                GraphObsConfig(**meta["graph_obs"]) if meta["graph_obs"] else None,
                meta["q_hidden"],
                rng=0,
            )
        except KeyError as exc:
            raise CheckpointError(f"{path}: checkpoint metadata lacks {exc}") from exc
        model.q_params.load_state(groups.get("q", {}))
        if model.engine is not None:
            model.engine.params.load_state(groups.get("node_update", {}))
        return model
