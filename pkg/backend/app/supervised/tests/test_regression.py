"""Regression dataset, loss bookkeeping, gradients and short training runs."""
from __future__ import annotations

import numpy as np
import pytest

from backend.app.core.errors import NonFiniteLossError, ShapeMismatchError
from backend.app.graph_obs import GraphObsConfig
from backend.app.graphs import GraphSampler, all_pairs_shortest_paths, generate_suite
from backend.app.nn import grad_check
from backend.app.routing import EnvConfig, RoutingEnv
from backend.app.supervised import (
    RegressionConfig,
    RegressionDataset,
    RegressionModel,
    build_dataset,
    evaluate_at_steps,
    load_samples,
    make_sample,
    samples_for_graphs,
    save_samples,
    saved_regression_config,
    train_regression,
)

SMALL_OBS = GraphObsConfig(hidden_dim=8, encoder_sizes=(16, 12))


def small_dataset(count: int = 24, validation: int = 6, num_nodes: int = 6, seed: int = 0) -> RegressionDataset:
    env = RoutingEnv(GraphSampler(num_nodes, 3), EnvConfig(num_packets=4), seed=seed)
    return build_dataset(count, env, validation=validation)


def small_model(sample, seed: int = 0, dtype=np.float32) -> RegressionModel:
    return RegressionModel(sample.graph.num_nodes, sample.node_obs.shape[1], 3, SMALL_OBS, rng=seed, dtype=dtype)


def test_targets_are_apsp():
    data = small_dataset()
    for s in data.train[:5]:
        np.testing.assert_array_equal(s.targets, all_pairs_shortest_paths(s.graph, "delay"))


def test_k4_unit_delay_targets(k4):
    sample = make_sample(RoutingEnv(k4, EnvConfig(num_packets=3), seed=0))
    np.testing.assert_array_equal(sample.targets, 1 - np.eye(4))
    hops = make_sample(RoutingEnv(k4, EnvConfig(num_packets=3), seed=0), target="hops")
    np.testing.assert_array_equal(hops.targets, 1 - np.eye(4))


def test_validation_split():
    data = small_dataset(count=10, validation=3)
    assert len(data.train) == 7
    assert len(data.validation) == 3
    with pytest.raises(ValueError):
        small_dataset(count=3, validation=3)


def test_samples_for_fixed_graphs_keep_graph_order():
    graphs = generate_suite(3, num_nodes=6, seed=1)
    samples = samples_for_graphs(graphs, EnvConfig(num_packets=4))
    assert [s.graph for s in samples] == graphs


def test_dataset_file_round_trip(tmp_path):
    data = small_dataset(count=4, validation=0)
    save_samples(tmp_path / "train.npz", data.train)
    loaded = load_samples(tmp_path / "train.npz")
    assert [s.graph for s in loaded] == [s.graph for s in data.train]
    for a, b in zip(loaded, data.train):
        np.testing.assert_array_equal(a.node_obs, b.node_obs)
        np.testing.assert_array_equal(a.targets, b.targets)


def test_zero_head_mse_equals_target_second_moment():
    data = small_dataset()
    model = small_model(data.train[0])
    for name in model.head_params:
        model.head_params[name][...] = 0
    (result,) = evaluate_at_steps(model, data.validation, [1])
    targets = np.concatenate([s.targets for s in data.validation])
    assert result.mse == pytest.approx(float(np.mean(targets**2)), rel=1e-6)
    assert result.mse_scaled == pytest.approx(result.mse / 100, rel=1e-6)


def test_single_step_evaluation_matches_training_loss():
    data = small_dataset()
    model = small_model(data.train[0], dtype=np.float64)
    loss, per_step = model.loss(data.validation, unroll=1, scale=10.0, backward=False)
    (result,) = evaluate_at_steps(model, data.validation, [1], scale=10.0)
    assert per_step == [loss]
    assert result.mse_scaled == pytest.approx(loss, rel=1e-9)


def test_loss_sums_steps():
    data = small_dataset()
    model = small_model(data.train[0], dtype=np.float64)
    total, per_step = model.loss(data.train[:4], unroll=3, scale=10.0, backward=False)
    results = evaluate_at_steps(model, data.train[:4], [1, 2, 3])
    assert total == pytest.approx(sum(per_step))
    assert [r.mse_scaled for r in results] == pytest.approx(per_step, rel=1e-9)


def test_mixed_graph_sizes_rejected():
    data = small_dataset()
    other = small_dataset(count=2, validation=0, num_nodes=8)
    model = small_model(data.train[0])
    with pytest.raises(ShapeMismatchError):
        model.loss([data.train[0], other.train[0]], unroll=1)


def test_checkpoint_round_trip(tmp_path):
    data = small_dataset(count=4, validation=2)
    model = small_model(data.train[0])
    model.save(tmp_path / "model.npz")
    loaded = RegressionModel.load(tmp_path / "model.npz")
    for a, b in zip(loaded.predict(data.validation, 2), model.predict(data.validation, 2)):
        np.testing.assert_array_equal(a, b)


def test_checkpoint_keeps_training_settings(tmp_path):
    data = small_dataset(count=6, validation=2)
    config = RegressionConfig(iterations=1, batch_size=2, unroll=1, target_scale=2.5, graph_obs=SMALL_OBS)
    model, _ = train_regression(data, config, model=small_model(data.train[0]))
    model.save(tmp_path / "trained.npz")
    assert RegressionModel.load(tmp_path / "trained.npz").config == config
    assert saved_regression_config(tmp_path / "trained.npz") == config

    small_model(data.train[0]).save(tmp_path / "bare.npz")
    assert RegressionModel.load(tmp_path / "bare.npz").config is None
    assert saved_regression_config(tmp_path / "bare.npz") is None


def test_regression_gradient_check():
    data = small_dataset(count=3, validation=0)
    model = small_model(data.train[0], dtype=np.float64)

    def loss():
        return model.loss(data.train, unroll=3, scale=10.0)[0]

    assert grad_check(loss, model.param_sets, num_coords=80) < 1e-4


def test_short_training_reduces_validation_loss():
    data = small_dataset(count=60, validation=10, seed=3)
    config = RegressionConfig(
        iterations=150, batch_size=8, unroll=3, eval_every=50, log_every=50, graph_obs=SMALL_OBS, seed=3
    )
    model = small_model(data.train[0], seed=3)
    initial = evaluate_at_steps(model, data.validation, [3])[0].mse_scaled
    model, curves = train_regression(data, config, model=model)
    assert len(curves) == 150
    assert [c.iteration for c in curves if c.val_loss is not None] == [50, 100, 150]
    assert curves[-1].val_loss < initial


def test_non_finite_loss_aborts():
    data = small_dataset()
    model = small_model(data.train[0])
    model.head_params["head.b"][0] = np.nan
    config = RegressionConfig(iterations=2, batch_size=4, unroll=2, graph_obs=SMALL_OBS)
    with pytest.raises(NonFiniteLossError) as info:
        train_regression(data, config, model=model)
    assert info.value.diagnostics["iteration"] == 1


@pytest.mark.slow
def test_desk_scale_refinement():
    config = RegressionConfig(train_graphs=10_000, val_graphs=500, iterations=5_000, unroll=8)
    env = RoutingEnv(GraphSampler(20, 3), EnvConfig(), seed=0)
    data = build_dataset(config.train_graphs, env, validation=config.val_graphs)
    model, curves = train_regression(data, config)
    test = samples_for_graphs(generate_suite(200, seed=99))
    mse = {r.step: r.mse for r in evaluate_at_steps(model, test, [1, 2, 4, 8])}
    assert mse[8] <= mse[1] / 3
    assert mse[1] > mse[2] > mse[4] > mse[8]
    first_val = next(c.val_loss for c in curves if c.val_loss is not None)
    assert curves[-1].val_loss < 0.25 * first_val
