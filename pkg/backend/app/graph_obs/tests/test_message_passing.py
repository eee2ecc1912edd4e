"""Message passing structure, locality, invariances and gradients."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backend.app.core.errors import ShapeMismatchError
from backend.app.graph_obs import GraphBatch, GraphObsConfig, NodeStates, RecurrentMessagePassing
from backend.app.graphs import Graph, all_pairs_shortest_paths, generate_graph
from backend.app.nn import ParamSet, grad_check

SMALL = dict(hidden_dim=8, encoder_sizes=(12, 10))


def engine_for(obs_dim: int, degree: int, iterations: int = 1, seed: int = 0, **overrides) -> RecurrentMessagePassing:
    config = GraphObsConfig(**{**SMALL, "iterations": iterations, **overrides})
    return RecurrentMessagePassing(obs_dim, degree, config, rng=seed, dtype=np.float64)


def run_steps(engine, batch, observations, states=None):
    states = states or engine.initial_states(batch.num_nodes)
    for obs in observations:
        states, _, _ = engine.node_state_update(states, obs, batch)
    return states


@pytest.fixture
def five_node() -> Graph:
    # cycle plus one chord: irregular, exercises missing neighbor slots
    return Graph.from_edges(5, [(0, 1, 1), (1, 2, 2), (2, 3, 1), (3, 4, 3), (4, 0, 1), (0, 2, 2)])


def test_initial_states_are_zero():
    engine = engine_for(4, 3)
    s = engine.initial_states(6)
    assert s.h.shape == s.c.shape == (6, 8)
    assert not s.h.any() and not s.c.any()


def test_encode_with_zero_cell_weights_gives_zero_state(path_graph):
    engine = engine_for(4, 2)
    for name in engine.params:
        if name.startswith("lstm_a"):
            engine.params[name][...] = 0
    h, c, _, _ = engine.encode(engine.initial_states(3), np.ones((3, 4)))
    assert not h.any() and not c.any()


def test_encode_shares_parameters_across_nodes():
    engine = engine_for(4, 2)
    obs = np.tile(np.array([[0.3, -1.0, 2.0, 0.5]]), (3, 1))
    h, _, _, _ = engine.encode(engine.initial_states(3), obs)
    np.testing.assert_array_equal(h[0], h[1])
    np.testing.assert_array_equal(h[1], h[2])


def test_encode_shape_mismatch():
    engine = engine_for(4, 2)
    with pytest.raises(ShapeMismatchError):
        engine.encode(engine.initial_states(3), np.ones((3, 5)))
    with pytest.raises(ShapeMismatchError):
        engine.encode(engine.initial_states(3), np.ones((2, 4)))


def test_aggregate_sums_neighbors(path_graph):
    batch = GraphBatch.single(path_graph)
    u, w = np.array([1.0, 2.0]), np.array([-3.0, 0.5])
    h = np.stack([u, np.array([9.0, 9.0]), w])
    m = RecurrentMessagePassing.aggregate(h, batch)
    np.testing.assert_array_equal(m[1], u + w)
    np.testing.assert_array_equal(m[0], h[1])
    assert not RecurrentMessagePassing.aggregate(np.zeros((3, 2)), batch).any()


def test_k1_intermediates_on_path(path_graph):
    engine = engine_for(4, 2)
    batch = GraphBatch.single(path_graph)
    obs = np.random.default_rng(0).normal(size=(3, 4))
    _, inter, _ = engine.node_state_update(engine.initial_states(3), obs, batch, keep_all=True)
    assert sorted(inter.hidden) == [0, 1]
    nbrs = inter.neighbor_states(0, batch)
    np.testing.assert_array_equal(nbrs[1, 0], inter.hidden[0][0])
    np.testing.assert_array_equal(nbrs[1, 1], inter.hidden[0][2])
    assert not nbrs[0, 1].any()


def test_production_mode_keeps_last_two_levels(graph20):
    engine = engine_for(5, 3, iterations=3)
    batch = GraphBatch.single(graph20)
    _, inter, _ = engine.node_state_update(engine.initial_states(20), np.ones((20, 5)), batch)
    assert sorted(inter.hidden) == [2, 3]


def test_readout_dimension_default_width(graph20):
    engine = RecurrentMessagePassing(7, 3, GraphObsConfig(), rng=0)
    batch = GraphBatch.single(graph20)
    _, inter, _ = engine.node_state_update(engine.initial_states(20), np.ones((20, 7)), batch)
    psi = engine.readout(inter, batch, np.arange(20))
    assert engine.readout_dim == 512
    assert psi.shape == (20, 512)


def test_readout_blocks(graph20):
    engine = engine_for(5, 3)
    batch = GraphBatch.single(graph20)
    obs = np.random.default_rng(1).normal(size=(20, 5))
    _, inter, _ = engine.node_state_update(engine.initial_states(20), obs, batch)
    psi = engine.readout(inter, batch, np.array([4, 4, 9]))
    np.testing.assert_array_equal(psi[0], psi[1])
    np.testing.assert_array_equal(psi[2, :8], inter.final[9])
    for k, w in enumerate(graph20.neighbors[9]):
        np.testing.assert_array_equal(psi[2, 8 * (k + 1) : 8 * (k + 2)], inter.hidden[0][w])


def test_readout_rejects_unassigned_agent(path_graph):
    engine = engine_for(4, 2)
    batch = GraphBatch.single(path_graph)
    _, inter, _ = engine.node_state_update(engine.initial_states(3), np.ones((3, 4)), batch)
    with pytest.raises(ShapeMismatchError):
        engine.readout(inter, batch, np.array([0, 3]))


@pytest.mark.parametrize("iterations, steps", [(1, 1), (1, 3), (2, 1), (2, 2)])
def test_k_hop_locality(graph20, iterations, steps):
    engine = engine_for(5, 3, iterations=iterations, seed=2)
    batch = GraphBatch.single(graph20)
    rng = np.random.default_rng(3)
    observations = [rng.normal(size=(20, 5)) for _ in range(steps)]
    base = run_steps(engine, batch, observations)
    hops = all_pairs_shortest_paths(graph20, "hops")
    for u in (0, 7, 13):
        perturbed = [obs.copy() for obs in observations]
        perturbed[0][u] += 1.0
        states = run_steps(engine, batch, perturbed)
        changed = np.flatnonzero((states.h != base.h).any(axis=1))
        assert (hops[u, changed] <= iterations * steps).all()
        assert u in changed


def test_information_reaches_every_node_after_diameter_steps(graph20):
    engine = engine_for(5, 3, seed=4)
    batch = GraphBatch.single(graph20)
    diameter = int(all_pairs_shortest_paths(graph20, "hops").max())
    rng = np.random.default_rng(5)
    observations = [rng.normal(size=(20, 5)) for _ in range(diameter)]
    base = run_steps(engine, batch, observations)
    perturbed = [obs.copy() for obs in observations]
    perturbed[0][0] += 1.0
    states = run_steps(engine, batch, perturbed)
    assert (np.abs(states.h - base.h).max(axis=1) > 0).all()


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_neighbor_order_does_not_change_states(seed):
    graph = generate_graph(10, 3, rng=seed)
    engine = engine_for(5, 3, iterations=2, seed=seed)
    rng = np.random.default_rng(seed)
    obs = rng.normal(size=(10, 5))
    batch = GraphBatch.single(graph)
    shuffled = GraphBatch(rng.permuted(batch.neighbors, axis=1), batch.offsets)
    a, _, _ = engine.node_state_update(engine.initial_states(10), obs, batch)
    b, _, _ = engine.node_state_update(engine.initial_states(10), obs, shuffled)
    np.testing.assert_allclose(a.h, b.h, rtol=1e-12, atol=1e-12)


def test_relabeling_nodes_permutes_states(graph20):
    engine = engine_for(5, 3, iterations=2, seed=6)
    batch = GraphBatch.single(graph20)
    rng = np.random.default_rng(7)
    obs = rng.normal(size=(20, 5))
    perm = rng.permutation(20)  # old id v becomes perm[v]
    inverse = np.argsort(perm)
    relabeled_nbrs = np.sort(perm[batch.neighbors[inverse]], axis=1)
    relabeled = GraphBatch(relabeled_nbrs, batch.offsets)
    a = run_steps(engine, batch, [obs, obs])
    b = run_steps(engine, relabeled, [obs[inverse], obs[inverse]])
    np.testing.assert_allclose(b.h[perm], a.h, rtol=1e-12, atol=1e-12)


def test_batched_graphs_match_single_runs(path_graph, graph20):
    engine = engine_for(5, 3, seed=8)
    rng = np.random.default_rng(9)
    obs_a, obs_b = rng.normal(size=(3, 5)), rng.normal(size=(20, 5))
    batch = GraphBatch.from_graphs([path_graph, graph20])
    joint, _, _ = engine.node_state_update(engine.initial_states(23), np.vstack([obs_a, obs_b]), batch)
    alone, _, _ = engine.node_state_update(engine.initial_states(20), obs_b, GraphBatch.single(graph20))
    np.testing.assert_allclose(joint.h[3:], alone.h, rtol=1e-12, atol=1e-12)
    assert batch.global_nodes(np.array([1, 0]), np.array([2, 2])).tolist() == [5, 2]


def test_state_difference():
    a = NodeStates(np.zeros((2, 2)), np.zeros((2, 2)))
    b = NodeStates(np.array([[1.0, -1.0], [0.0, 2.0]]), np.zeros((2, 2)))
    assert a.mean_abs_diff(b) == pytest.approx(1.0)


@pytest.mark.parametrize("iterations", [1, 2])
def test_unrolled_gradient_check(five_node, iterations):
    engine = engine_for(4, 3, iterations=iterations, seed=10)
    batch = GraphBatch.single(five_node)
    rng = np.random.default_rng(11)
    unroll = 3
    inputs = ParamSet(np.float64)
    inputs.add("m", rng.normal(size=(unroll, 5, 4)))
    nodes = np.array([0, 2, 4, 2])
    weights = rng.normal(size=(unroll, len(nodes), engine.readout_dim))

    def loss():
        states = engine.initial_states(5)
        total, records = 0.0, []
        for j in range(unroll):
            states, inter, tape = engine.node_state_update(states, inputs["m"][j], batch)
            psi = engine.readout(inter, batch, nodes)
            total += float(np.sum(psi * weights[j]))
            records.append((tape, engine.readout_backward(weights[j], batch, nodes)))
        dh = dc = None
        dm = np.zeros_like(inputs["m"])
        for j in reversed(range(unroll)):
            tape, injected = records[j]
            dh, dc, dm[j] = engine.step_backward(tape, batch, injected, dh, dc)
        inputs.accumulate("m", dm)
        return total

    assert grad_check(loss, [engine.params, inputs], num_coords=120) < 1e-4
