"""Shortest-path baselines, action masking, episode metrics and trace export."""
from __future__ import annotations

import csv

import numpy as np
import pytest

from backend.app.core.errors import EmptyTraceError
from backend.app.graphs import all_pairs_shortest_paths, generate_graph
from backend.app.routing import (
    Decision,
    EnvConfig,
    EpisodeTrace,
    RoutingEnv,
    RoutingPolicy,
    ShortestPathPolicy,
    action_mask,
    action_masks,
    aggregate_metrics,
    episode_metrics,
    run_episode,
    shortest_path_policy,
    write_trace_csv,
)
from backend.app.routing.metrics import StepRecord


class MaskedRandomPolicy:
    """Uniform over legal edge actions; drops dead-ended packets."""

    name = "masked-random"

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def reset(self, env):
        pass

    def decide(self, env, observation):
        masks, drops = action_masks(env.state, strict=True)
        actions = np.zeros(env.num_agents, dtype=np.int64)
        for i, mask in enumerate(masks):
            legal = np.flatnonzero(mask)
            if legal.size:
                actions[i] = self.rng.choice(legal)
        return Decision(actions, drops)


def test_policies_satisfy_protocol():
    assert isinstance(ShortestPathPolicy(), RoutingPolicy)
    assert isinstance(MaskedRandomPolicy(0), RoutingPolicy)


def test_unknown_variant():
    with pytest.raises(ValueError):
        ShortestPathPolicy("greedy")


def test_shortest_path_on_path_graph(path_graph):
    env = RoutingEnv(path_graph, EnvConfig(num_packets=1), seed=0)
    env.reset()
    p = env.state.packets
    p.node[0] = p.src[0] = 0
    p.dst[0] = 2
    policy = shortest_path_policy(env)
    assert policy.decide(env).actions.tolist() == [1]


def test_shortest_path_breaks_ties_by_smallest_neighbor(ring6):
    env = RoutingEnv(ring6, EnvConfig(num_packets=1), seed=0)
    env.reset()
    p = env.state.packets
    p.node[0] = p.src[0] = 0
    p.dst[0] = 3
    # 0-1-2-3 and 0-5-4-3 both cost 3; neighbors of 0 are [1, 3, 5]
    assert shortest_path_policy(env).decide(env).actions.tolist() == [1]


def test_stepwise_replans_after_override_static_does_not(ring6):
    env = RoutingEnv(ring6, EnvConfig(num_packets=1), seed=0)
    env.reset()
    p = env.state.packets
    p.node[0] = p.src[0] = 0
    p.dst[0] = 3
    static = shortest_path_policy(env, "static")
    stepwise = shortest_path_policy(env, "stepwise")
    env.schedule_delay_override((0, 1), 10, at_step=0)
    assert static.decide(env).actions.tolist() == [1]
    assert stepwise.decide(env).actions.tolist() == [3]


@pytest.mark.parametrize("seed", range(20))
def test_shortest_path_delays_match_apsp(seed):
    graph = generate_graph(20, 3, rng=seed)
    apsp = all_pairs_shortest_paths(graph, "delay")
    env = RoutingEnv(graph, EnvConfig(episode_len=120), seed=seed)
    env.reset()
    policy = shortest_path_policy(env, "static")
    checked = 0
    for _ in range(120):
        p = env.state.packets
        src, dst, spawn = p.src.copy(), p.dst.copy(), p.spawn_step.copy()
        t = env.state.step
        result = env.step(policy.decide(env).actions)
        for i in np.flatnonzero(result.arrived):
            assert t - spawn[i] == apsp[src[i], dst[i]]
            checked += 1
    assert checked > 0


def test_unlimited_mode_dominates_limited(graph20):
    totals = {}
    for mode in ("unlimited", "limited"):
        env = RoutingEnv(graph20, EnvConfig(mode=mode, episode_len=100), seed=0)
        totals[mode] = sum(
            run_episode(env, ShortestPathPolicy("static"), seed=s).arrivals for s in range(5)
        )
    assert totals["unlimited"] >= totals["limited"]


def test_mask_of_fresh_packet_allows_all_edges(graph20):
    env = RoutingEnv(graph20, seed=0)
    env.reset()
    mask, drop = action_mask(env.state, 0)
    assert mask.all()
    assert not drop


def test_mask_signals_drop_when_all_neighbors_visited(k4):
    env = RoutingEnv(k4, EnvConfig(num_packets=1), seed=0)
    env.reset()
    p = env.state.packets
    p.node[0] = 0
    p.dst[0] = 3
    p.visited[0] = [1, 2, 3, 0]
    mask, drop = action_mask(env.state, 0)
    assert mask.tolist() == [True, False, False, False]
    assert drop
    assert action_mask(env.state, 0, strict=True)[0].tolist() == [False] * 4


def test_dropped_packet_respawns_without_reward(k4):
    env = RoutingEnv(k4, EnvConfig(num_packets=1), seed=0)
    env.reset()
    result = env.step([0], drops=[True])
    assert result.dropped[0]
    assert result.rewards[0] == 0
    assert env.state.drops == 1
    assert env.state.packets.spawn_step[0] == 1


def test_masked_rollouts_never_revisit(graph20):
    env = RoutingEnv(graph20, EnvConfig(episode_len=40), seed=2)
    policy = MaskedRandomPolicy(2)
    for episode in range(100):
        obs = env.reset()
        policy.reset(env)
        for _ in range(40):
            decision = policy.decide(env, obs)
            result = env.step(decision.actions, decision.drops)
            obs = result.observation
            for visited in env.state.packets.visited:
                assert len(visited) == len(set(visited))


def test_run_episode_and_metrics(graph20):
    env = RoutingEnv(graph20, EnvConfig(episode_len=50), seed=0)
    trace = run_episode(env, ShortestPathPolicy(), seed=0)
    m = episode_metrics(trace)
    assert m.steps == 50
    assert m.throughput == trace.arrivals / 50
    assert m.mean_reward == pytest.approx(10 * trace.arrivals / (20 * 50))
    assert m.drops_per_step == 0
    assert m.mean_delay is not None and m.mean_delay >= 1


def test_episode_metrics_without_arrivals():
    trace = EpisodeTrace(num_agents=2)
    trace.steps.append(StepRecord(0, np.zeros(2), np.array([-0.2, 0.0]), 0, 1, 0))
    trace.steps.append(StepRecord(1, np.zeros(2), np.array([-0.2, -0.2]), 0, 2, 0))
    m = episode_metrics(trace)
    assert m.throughput == 0
    assert m.mean_delay is None
    assert m.mean_reward == pytest.approx(-0.2 * 3 / (2 * 2))


def test_episode_metrics_rejects_empty_trace():
    with pytest.raises(EmptyTraceError):
        episode_metrics(EpisodeTrace(num_agents=3))


def test_aggregate_metrics(graph20):
    env = RoutingEnv(graph20, EnvConfig(episode_len=30), seed=0)
    runs = [episode_metrics(run_episode(env, ShortestPathPolicy(), seed=s)) for s in range(3)]
    agg = aggregate_metrics(runs)
    assert agg["throughput"]["mean"] == pytest.approx(np.mean([r.throughput for r in runs]))
    assert 0 <= agg["never_arrived_fraction"]["mean"] <= 1


def test_trace_csv_export(tmp_path, path_graph):
    env = RoutingEnv(path_graph, EnvConfig(num_packets=2, episode_len=5), seed=0)
    trace = run_episode(env, ShortestPathPolicy(), seed=0)
    out = tmp_path / "trace.csv"
    write_trace_csv(trace, out)
    with open(out, newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 10
    assert list(rows[0]) == ["step", "agent", "action", "reward", "arrivals", "blocks", "drops"]
    assert sum(float(r["reward"]) for r in rows) == pytest.approx(trace.total_reward)
