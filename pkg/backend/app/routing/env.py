"""Discrete-time packet routing environment.

Each of the N agents is one packet. Agents are processed in ascending slot
order within a step, so an agent entering an edge changes the load seen by
the agents after it. Packets on an edge count down their remaining time and
arrive at the edge head when it reaches zero; a packet arriving at its
destination is rewarded and its slot is immediately refilled with a new
packet, so the population stays at N.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from backend.app.core.errors import InvalidActionError, UnknownEdgeError
from backend.app.graphs import Graph
from backend.app.routing.config import DelayOverride, EnvConfig
from backend.app.routing.observations import agent_observations, edge_features, node_observations

logger = logging.getLogger(__name__)

GraphSource = Union[Graph, Callable[[np.random.Generator], Graph]]

WAIT = 0


@dataclass
class PacketTable:
    """Per-slot packet fields; `edge == -1` means the packet sits at `node`.

    For a packet in transit `node` already holds the head of its edge.
    """

    src: np.ndarray
    dst: np.ndarray
    size: np.ndarray
    node: np.ndarray
    edge: np.ndarray
    remaining: np.ndarray
    spawn_step: np.ndarray
    visited: list[list[int]]

    @classmethod
    def empty(cls, n: int) -> "PacketTable":
        z = np.zeros(n, dtype=np.int64)
        return cls(
            z.copy(), z.copy(), np.zeros(n), z.copy(), np.full(n, -1), z.copy(), z.copy(), [[] for _ in range(n)]
        )

    def in_transit(self) -> np.ndarray:
        return self.edge >= 0

    def acting(self) -> np.ndarray:
        """Slots whose action takes effect this step (at a node or about to arrive)."""
        return (self.edge < 0) | (self.remaining <= 1)


@dataclass
class EnvState:
    graph: Graph
    packets: PacketTable
    delays: np.ndarray
    edge_load: np.ndarray
    step: int = 0
    arrivals: int = 0
    blocks: int = 0
    drops: int = 0
    overrides: list[tuple[int, int, int]] = field(default_factory=list)


@dataclass
class Observation:
    agent_obs: np.ndarray  # (N, 2L + 1 + D(L + 2))
    node_obs: np.ndarray  # (L, L + 2 + D(L + 2))


@dataclass
class StepResult:
    rewards: np.ndarray
    dones: np.ndarray
    arrived: np.ndarray
    dropped: np.ndarray
    truncated: bool
    observation: Observation
    arrivals: int = 0
    blocks: int = 0
    drops: int = 0
    arrival_delays: list[int] = field(default_factory=list)

    @property
    def terminal(self) -> np.ndarray:
        """Slots whose packet left the network this step (no bootstrap)."""
        return self.arrived | self.dropped


class RoutingEnv:
    """Multi-agent routing environment over a fixed or resampled graph.

    `graph_source` is either a `Graph` or a callable drawing a new graph from
    the environment's generator at every reset.
    """

    def __init__(self, graph_source: GraphSource, config: EnvConfig | None = None, seed: int | None = None):
        self.graph_source = graph_source
        self.config = config or EnvConfig()
        self.rng = np.random.default_rng(seed)
        self.state: EnvState | None = None

    @property
    def graph(self) -> Graph:
        return self.state.graph

    @property
    def num_agents(self) -> int:
        return self.config.num_packets

    def reset(self, seed: int | None = None) -> Observation:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        src = self.graph_source
        graph = src if isinstance(src, Graph) else src(self.rng)
        n = self.config.num_packets
        self.state = EnvState(
            graph=graph,
            packets=PacketTable.empty(n),
            delays=graph.delays.copy(),
            edge_load=np.zeros(graph.num_edges),
        )
        for o in self.config.delay_overrides:
            self._schedule(o)
        self._refresh_delays()
        for slot in range(n):
            self._spawn(slot, 0)
        return self.observe()

    def schedule_delay_override(self, edge: int | tuple[int, int], new_delay: int, at_step: int) -> None:
        """Change the delay of `edge` for packets entering from `at_step` on.

        Packets already on the edge keep their remaining time. The schedule
        is cleared on reset; persistent overrides belong in `EnvConfig`.
        """
        self._schedule(DelayOverride(edge=edge, delay=new_delay, at_step=at_step))
        self._refresh_delays()

    def _schedule(self, override: DelayOverride) -> None:
        g = self.state.graph
        if isinstance(override.edge, int):
            if not 0 <= override.edge < g.num_edges:
                raise UnknownEdgeError(f"edge index {override.edge} not in [0, {g.num_edges})")
            idx = override.edge
        else:
            u, v = override.edge
            key = (min(u, v), max(u, v))
            if key not in g.edge_index:
                raise UnknownEdgeError(f"no edge between {u} and {v}")
            idx = g.edge_index[key]
        self.state.overrides.append((override.at_step, idx, override.delay))
        self.state.overrides.sort(key=lambda o: o[0])

    def _refresh_delays(self) -> None:
        s = self.state
        delays = s.graph.delays.copy()
        for at_step, idx, delay in s.overrides:
            if at_step <= s.step:
                delays[idx] = delay
        if not np.array_equal(delays, s.delays):
            logger.debug("step %d: edge delays changed", s.step)
        s.delays = delays

    def _spawn(self, slot: int, step: int) -> None:
        p = self.state.packets
        num_nodes = self.state.graph.num_nodes
        src = int(self.rng.integers(num_nodes))
        dst = int(self.rng.integers(num_nodes - 1))
        if dst >= src:
            dst += 1
        p.src[slot] = p.node[slot] = src
        p.dst[slot] = dst
        p.size[slot] = self.rng.random()
        p.edge[slot] = -1
        p.remaining[slot] = 0
        p.spawn_step[slot] = step
        p.visited[slot] = [src]

    def step(self, actions: Sequence[int], drops: Sequence[bool] | None = None) -> StepResult:
        """Advance one time step.

        `actions[i]` is 0 to wait or k in 1..D to take the k-th outgoing edge
        (ascending neighbor id). Actions of in-transit agents are ignored
        except on the step their transit completes: the packet then moves on
        from the edge head within the same step, so a path costs exactly the
        sum of its edge delays.
        `drops` marks acting agents whose packet is discarded (masked
        evaluation); dropped slots are refilled like arrivals.
        """
        s = self.state
        cfg = self.config
        g = s.graph
        n = cfg.num_packets
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (n,):
            raise InvalidActionError(f"expected {n} actions, got shape {actions.shape}")
        bad = (actions < 0) | (actions > g.degree)
        if bad.any():
            raise InvalidActionError(f"actions out of range [0, {g.degree}]: {actions[bad].tolist()}")
        drop = np.zeros(n, dtype=bool) if drops is None else np.asarray(drops, dtype=bool)

        p = s.packets
        t = s.step
        rewards = np.zeros(n)
        arrived = np.zeros(n, dtype=bool)
        dropped = np.zeros(n, dtype=bool)
        result_delays: list[int] = []
        blocks = 0

        for i in range(n):
            if p.edge[i] >= 0:
                p.remaining[i] -= 1
                if p.remaining[i] > 0:
                    continue
                s.edge_load[p.edge[i]] -= p.size[i]
                p.edge[i] = -1
                p.visited[i].append(int(p.node[i]))
                if p.node[i] == p.dst[i]:
                    rewards[i] += cfg.arrival_reward
                    arrived[i] = True
                    result_delays.append(t - int(p.spawn_step[i]))
                    continue
            if drop[i]:
                dropped[i] = True
                continue
            a = actions[i]
            if a == WAIT:
                continue
            u = p.node[i]
            w = g.neighbors[u, a - 1]
            if w < 0:
                continue
            e = g.edge_slots[u, a - 1]
            if cfg.mode == "limited" and not s.edge_load[e] < 1.0 - p.size[i]:
                rewards[i] += cfg.block_penalty
                blocks += 1
                continue
            s.edge_load[e] += p.size[i]
            p.edge[i] = e
            p.remaining[i] = s.delays[e]
            p.node[i] = w

        # exact loads, free of incremental rounding
        moving = p.in_transit()
        s.edge_load = np.bincount(p.edge[moving], weights=p.size[moving], minlength=g.num_edges)

        s.step = t + 1
        for i in np.flatnonzero(arrived | dropped):
            self._spawn(int(i), s.step)
        self._refresh_delays()

        s.arrivals += int(arrived.sum())
        s.blocks += blocks
        s.drops += int(dropped.sum())
        truncated = s.step >= cfg.episode_len
        dones = arrived | dropped
        if truncated:
            dones = np.ones(n, dtype=bool)
        return StepResult(
            rewards=rewards,
            dones=dones,
            arrived=arrived,
            dropped=dropped,
            truncated=truncated,
            observation=self.observe(),
            arrivals=int(arrived.sum()),
            blocks=blocks,
            drops=int(dropped.sum()),
            arrival_delays=result_delays,
        )

    def observe(self) -> Observation:
        edges = edge_features(self.state, self.config)
        return Observation(
            agent_obs=agent_observations(self.state, self.config, edges),
            node_obs=node_observations(self.state, self.config, edges),
        )

    def unarrived_initial_packets(self) -> int:
        """Packets alive since step 0 that have neither arrived nor been dropped."""
        return int((self.state.packets.spawn_step == 0).sum())
