"""Recurrent message passing over node states.

One environment step runs

    e_v        = enc(m_v)
    h_0, c_0   = LSTM_A(e_v, h_v, c_v)
    M_k        = sum of h_k over the neighbors of v          k = 0 .. K-1
    h_k+1, c_k+1 = LSTM_B(M_k, h_k, c_k)

and carries `(h_K, c_K)` to the next step. Both cells share the per-node
state pair. The graph observation of an agent at node v is
`h_K[v] ++ h_{K-1}[w] for w in neighbors(v)`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from backend.app.core.errors import ShapeMismatchError
from backend.app.graph_obs.batch import GraphBatch
from backend.app.graph_obs.config import GraphObsConfig
from backend.app.nn import DenseStack, LSTMCell, ParamSet
from backend.app.nn.lstm import LSTMCache

logger = logging.getLogger(__name__)


@dataclass
class NodeStates:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, num_nodes: int, hidden_dim: int, dtype=np.float32) -> "NodeStates":
        return cls(np.zeros((num_nodes, hidden_dim), dtype=dtype), np.zeros((num_nodes, hidden_dim), dtype=dtype))

    def copy(self) -> "NodeStates":
        return NodeStates(self.h.copy(), self.c.copy())

    def mean_abs_diff(self, other: "NodeStates") -> float:
        """Mean absolute difference of the hidden values."""
        return float(np.mean(np.abs(self.h - other.h)))


@dataclass
class Intermediates:
    """Hidden vectors `h_k` after encode (k=0) and after each update."""

    hidden: dict[int, np.ndarray]
    iterations: int

    @property
    def final(self) -> np.ndarray:
        return self.hidden[self.iterations]

    def neighbor_states(self, k: int, batch: GraphBatch) -> np.ndarray:
        """`(n, D, d_h)` neighbor hidden vectors at iteration k, zero for missing slots."""
        return _gather(self.hidden[k], batch.neighbors)


@dataclass
class StepTape:
    enc_caches: list
    a_cache: LSTMCache
    b_caches: list[LSTMCache] = field(default_factory=list)


def _gather(h: np.ndarray, index: np.ndarray) -> np.ndarray:
    padded = np.concatenate([h, np.zeros((1, h.shape[1]), dtype=h.dtype)])
    return padded[index]


def _scatter(grad: np.ndarray, index: np.ndarray, num_nodes: int) -> np.ndarray:
    """Adjoint of `_gather`: sum `grad[..., d]` into rows `index` (-1 dropped)."""
    out = np.zeros((num_nodes + 1, grad.shape[-1]), dtype=grad.dtype)
    np.add.at(out, index.reshape(-1), grad.reshape(-1, grad.shape[-1]))
    return out[:num_nodes]


class RecurrentMessagePassing:
    def __init__(
        self,
        node_obs_dim: int,
        degree: int,
        config: GraphObsConfig | None = None,
        rng: np.random.Generator | int | None = None,
        dtype=np.float32,
    ):
        self.config = config or GraphObsConfig()
        rng = np.random.default_rng(rng)
        d_h = self.config.hidden_dim
        self.node_obs_dim = node_obs_dim
        self.degree = degree
        self.params = ParamSet(dtype)
        self.encoder = DenseStack(self.params, "node_enc", [node_obs_dim, *self.config.encoder_sizes, d_h], rng)
        self.lstm_a = LSTMCell(self.params, "lstm_a", d_h, d_h, rng)
        self.lstm_b = LSTMCell(self.params, "lstm_b", d_h, d_h, rng)

    @property
    def hidden_dim(self) -> int:
        return self.config.hidden_dim

    @property
    def iterations(self) -> int:
        return self.config.iterations

    @property
    def readout_dim(self) -> int:
        return self.hidden_dim * (1 + self.degree)

    def initial_states(self, num_nodes: int) -> NodeStates:
        return NodeStates.zeros(num_nodes, self.hidden_dim, self.params.dtype)

    def encode(self, states: NodeStates, node_obs: np.ndarray) -> tuple[np.ndarray, np.ndarray, list, LSTMCache]:
        if node_obs.ndim != 2 or node_obs.shape[1] != self.node_obs_dim:
            raise ShapeMismatchError(f"node observations must be (n, {self.node_obs_dim}), got {node_obs.shape}")
        if node_obs.shape[0] != states.h.shape[0]:
            raise ShapeMismatchError(f"{node_obs.shape[0]} observations for {states.h.shape[0]} node states")
        e, enc_caches = self.encoder.forward(node_obs.astype(self.params.dtype, copy=False))
        h, c, a_cache = self.lstm_a.forward(e, states.h, states.c)
        return h, c, enc_caches, a_cache

    @staticmethod
    def aggregate(h: np.ndarray, batch: GraphBatch) -> np.ndarray:
        """Sum of neighbor hidden vectors; the node's own state is excluded."""
        return _gather(h, batch.neighbors).sum(axis=1)

    def update(self, messages: np.ndarray, h: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray, LSTMCache]:
        return self.lstm_b.forward(messages, h, c)

    def node_state_update(
        self,
        states: NodeStates,
        node_obs: np.ndarray,
        batch: GraphBatch,
        keep_all: bool | None = None,
    ) -> tuple[NodeStates, Intermediates, StepTape]:
        """Encode once, then K aggregate/update rounds.

        Returns the carry `(h_K, c_K)`, the retained intermediate states and
        the tape needed by `step_backward`.
        """
        keep_all = self.config.keep_all if keep_all is None else keep_all
        K = self.iterations
        h, c, enc_caches, a_cache = self.encode(states, node_obs)
        tape = StepTape(enc_caches, a_cache)
        hidden = {0: h}
        for k in range(K):
            h, c, b_cache = self.update(self.aggregate(h, batch), h, c)
            tape.b_caches.append(b_cache)
            hidden[k + 1] = h
        if not keep_all:
            hidden = {k: v for k, v in hidden.items() if k >= K - 1}
        return NodeStates(h, c), Intermediates(hidden, K), tape

    def readout(self, inter: Intermediates, batch: GraphBatch, nodes: np.ndarray) -> np.ndarray:
        """`(N, d_h (1 + D))` graph observations of agents sitting at global `nodes`."""
        nodes = np.asarray(nodes, dtype=np.int64)
        if nodes.ndim != 1 or (nodes < 0).any() or (nodes >= batch.num_nodes).any():
            raise ShapeMismatchError(f"every agent needs one node in [0, {batch.num_nodes})")
        own = inter.final[nodes]
        nbrs = _gather(inter.hidden[inter.iterations - 1], batch.neighbors[nodes])
        return np.concatenate([own, nbrs.reshape(len(nodes), -1)], axis=1)

    def readout_backward(
        self, dpsi: np.ndarray, batch: GraphBatch, nodes: np.ndarray
    ) -> dict[int, np.ndarray]:
        """Gradients w.r.t. `h_K` and `h_{K-1}` for `step_backward`."""
        d_h = self.hidden_dim
        n = batch.num_nodes
        K = self.iterations
        nodes = np.asarray(nodes, dtype=np.int64)
        d_own = _scatter(dpsi[:, :d_h], nodes, n)
        d_nbr = _scatter(dpsi[:, d_h:].reshape(len(nodes), -1, d_h), batch.neighbors[nodes], n)
        return {K: d_own, K - 1: d_nbr}

    def step_backward(
        self,
        tape: StepTape,
        batch: GraphBatch,
        injected: dict[int, np.ndarray] | None = None,
        dh_next: np.ndarray | None = None,
        dc_next: np.ndarray | None = None,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Backpropagate one environment step.

        `injected[k]` is an external gradient on `h_k` (from readouts);
        `dh_next`/`dc_next` flow back from the following step's carry.
        Returns gradients w.r.t. the incoming `(h, c)` and the node
        observations, accumulating parameter gradients.
        """
        injected = injected or {}
        K = self.iterations
        n = batch.num_nodes
        zeros = np.zeros((n, self.hidden_dim), dtype=self.params.dtype)
        dh = zeros.copy()
        dc = zeros.copy() if dc_next is None else dc_next
        if dh_next is not None:
            dh = dh + dh_next
        if K in injected:
            dh = dh + injected[K]
        for k in range(K - 1, -1, -1):
            dM, dh_k, dc = self.lstm_b.backward(dh, dc, tape.b_caches[k])
            spread = np.broadcast_to(dM[:, None, :], batch.neighbors.shape + dM.shape[1:])
            dh = dh_k + _scatter(spread, batch.neighbors, n)
            if k in injected:
                dh = dh + injected[k]
        de, dh_prev, dc_prev = self.lstm_a.backward(dh, dc, tape.a_cache)
        dm = self.encoder.backward(de, tape.enc_caches)
        return dh_prev, dc_prev, dm
