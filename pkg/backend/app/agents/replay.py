"""Ring-buffer replay memory with stored node states.

One slot holds one environment step for all agents. Slots are preallocated
lazily from the first transition and overwritten oldest first. Graphs are
kept once per episode in a registry and pruned when no slot refers to them
any more.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, fields

import numpy as np

from backend.app.graphs import Graph

logger = logging.getLogger(__name__)


@dataclass
class Transition:
    """Step `t -> t+1` of all N agents.

    `h`/`c` are the node states before the step's update (None without
    graph observations). `nodes` is the agent -> node assignment used for
    the readout; `terminal` marks packets that left the network.
    """

    agent_obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminal: np.ndarray
    next_agent_obs: np.ndarray
    nodes: np.ndarray
    next_nodes: np.ndarray
    episode_start: bool
    h: np.ndarray | None = None
    c: np.ndarray | None = None
    node_obs: np.ndarray | None = None
    next_node_obs: np.ndarray | None = None


ARRAY_FIELDS = [f.name for f in fields(Transition)]


@dataclass
class TransitionBatch:
    """Fields of several slots stacked along a leading axis, plus their graphs."""

    graphs: list[Graph]
    agent_obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminal: np.ndarray
    next_agent_obs: np.ndarray
    nodes: np.ndarray
    next_nodes: np.ndarray
    episode_start: np.ndarray
    h: np.ndarray | None = None
    c: np.ndarray | None = None
    node_obs: np.ndarray | None = None
    next_node_obs: np.ndarray | None = None


class ReplayMemory:
    def __init__(self, capacity: int, dtype=np.float32):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self.dtype = np.dtype(dtype)
        self.size = 0
        self.pos = 0
        self._data: dict[str, np.ndarray | None] = {}
        self._graph_ids = np.full(capacity, -1, dtype=np.int64)
        self.graphs: dict[int, Graph] = {}
        self._last_graph: Graph | None = None
        self._next_graph_id = 0

    def __len__(self) -> int:
        return self.size

    def _allocate(self, t: Transition) -> None:
        for name in ARRAY_FIELDS:
            value = getattr(t, name)
            if value is None:
                self._data[name] = None
                continue
            value = np.asarray(value)
            dtype = self.dtype if np.issubdtype(value.dtype, np.floating) else value.dtype
            self._data[name] = np.zeros((self.capacity, *value.shape), dtype=dtype)

    def push(self, transition: Transition, graph: Graph) -> int:
        """Store `transition` observed on `graph`; returns the slot index."""
        if not self._data:
            self._allocate(transition)
        if graph is not self._last_graph:
            self._last_graph = graph
            self.graphs[self._next_graph_id] = graph
            self._next_graph_id += 1
        slot = self.pos
        for name, store in self._data.items():
            if store is not None:
                store[slot] = getattr(transition, name)
        self._graph_ids[slot] = self._next_graph_id - 1
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        if self.size == self.capacity:
            oldest = self._graph_ids[self.pos]
            for gid in [g for g in self.graphs if g < oldest]:
                del self.graphs[gid]
        return slot

    def _physical(self, logical: np.ndarray) -> np.ndarray:
        """Map positions counted from the oldest stored slot to slot indices."""
        oldest = (self.pos - self.size) % self.capacity
        return (oldest + logical) % self.capacity

    def can_sample(self, length: int) -> bool:
        return self.size >= length

    def sample_sequences(self, batch_size: int, length: int, rng: np.random.Generator) -> np.ndarray:
        """`(batch_size, length)` slot indices of contiguous stored steps.

        Starts are uniform over every position with `length - 1` written
        successors. Sequences may span episode boundaries.
        """
        if not self.can_sample(length):
            raise ValueError(f"replay holds {self.size} steps, sequences need {length}")
        starts = rng.integers(self.size - length + 1, size=batch_size)
        return self._physical(starts[:, None] + np.arange(length)[None, :])

    def gather(self, slots: np.ndarray) -> TransitionBatch:
        slots = np.asarray(slots, dtype=np.int64)
        if (slots < 0).any() or (slots >= self.capacity).any():
            raise IndexError("slot index out of range")
        # before the first wrap the written slots are exactly [0, size)
        if self.size < self.capacity and (slots >= self.size).any():
            raise IndexError("slot has not been written")
        values = {name: (None if store is None else store[slots]) for name, store in self._data.items()}
        graphs = [self.graphs[int(gid)] for gid in self._graph_ids[slots]]
        return TransitionBatch(graphs=graphs, **values)
