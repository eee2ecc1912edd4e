"""Layer, LSTM, loss, optimizer and checkpoint tests in float64."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backend.app.core.errors import CheckpointError, ShapeMismatchError
from backend.app.nn import (
    AdamW,
    DenseStack,
    Linear,
    LSTMCell,
    ParamSet,
    clip_grad_norm,
    grad_check,
    leaky_relu,
    leaky_relu_backward,
    linear_forward,
    load_checkpoint,
    mse_loss,
    save_checkpoint,
)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def test_linear_identity_and_bias():
    x = np.arange(4.0)[None, :]
    np.testing.assert_array_equal(linear_forward(x, np.eye(4), np.zeros(4)), x)
    b = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(linear_forward(np.zeros((1, 4)), np.ones((4, 3)), b), b[None])


def test_linear_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        linear_forward(np.zeros((2, 5)), np.zeros((4, 3)), np.zeros(3))


def test_linear_gradient_check(rng):
    params = ParamSet(np.float64)
    layer = Linear(params, "lin", 8, 8, rng)
    params.add("x", rng.normal(size=(3, 8)))
    weights = rng.normal(size=(3, 8))

    def loss():
        y, cache = layer.forward(params["x"])
        dx = layer.backward(weights, cache)
        params.accumulate("x", dx)
        return float(np.sum(y * weights))

    assert grad_check(loss, params, num_coords=60, eps=1e-5) < 1e-4


def test_leaky_relu_values():
    np.testing.assert_array_equal(leaky_relu(np.array([0.0, 2.0, 3.5])), [0.0, 2.0, 3.5])
    assert leaky_relu(np.array([-1.0]), 0.01)[0] == pytest.approx(-0.01)


def test_leaky_relu_gradient_check(rng):
    params = ParamSet(np.float64)
    x = rng.uniform(0.1, 1.0, size=(4, 6)) * rng.choice([-1.0, 1.0], size=(4, 6))
    params.add("x", x)
    weights = rng.normal(size=x.shape)

    def loss():
        params.accumulate("x", leaky_relu_backward(weights, params["x"]))
        return float(np.sum(leaky_relu(params["x"]) * weights))

    assert grad_check(loss, params, num_coords=24) < 1e-4


def test_dense_stack_gradient_check(rng):
    params = ParamSet(np.float64)
    stack = DenseStack(params, "enc", [5, 7, 4], rng)
    x = rng.normal(size=(6, 5))
    target = rng.normal(size=(6, 4))

    def loss():
        y, caches = stack.forward(x)
        value, dy = mse_loss(y, target)
        stack.backward(dy, caches)
        return value

    assert grad_check(loss, params, num_coords=60) < 1e-4


def test_lstm_zero_parameters_give_zero_state():
    params = ParamSet(np.float64)
    cell = LSTMCell(params, "cell", 3, 4, np.random.default_rng(0), forget_bias=0.0)
    for name in params:
        params[name][...] = 0
    h, c, _ = cell.forward(np.ones((2, 3)), np.zeros((2, 4)), np.zeros((2, 4)))
    np.testing.assert_array_equal(h, 0)
    np.testing.assert_array_equal(c, 0)


def test_lstm_forget_bias_initialized_to_one():
    params = ParamSet(np.float64)
    LSTMCell(params, "cell", 3, 4, np.random.default_rng(0))
    b = params["cell.b"]
    np.testing.assert_array_equal(b[4:8], 1.0)
    np.testing.assert_array_equal(np.delete(b, np.s_[4:8]), 0.0)


def test_lstm_saturated_forget_gate_keeps_cell(rng):
    params = ParamSet(np.float64)
    cell = LSTMCell(params, "cell", 3, 4, rng)
    for name in params:
        params[name][...] = 0
    params["cell.b"][4:8] = 10.0
    c = rng.normal(size=(1, 4))
    _, c_new, _ = cell.forward(np.zeros((1, 3)), np.zeros((1, 4)), c)
    np.testing.assert_allclose(c_new, c, atol=1e-3)


def test_lstm_shape_mismatch(rng):
    cell = LSTMCell(ParamSet(np.float64), "cell", 3, 4, rng)
    with pytest.raises(ShapeMismatchError):
        cell.forward(np.zeros((1, 2)), np.zeros((1, 4)), np.zeros((1, 4)))


@pytest.mark.parametrize("steps", [2, 3])
def test_lstm_bptt_gradient_check(rng, steps):
    params = ParamSet(np.float64)
    cell = LSTMCell(params, "cell", 3, 5, rng)
    params.add("h0", rng.normal(size=(2, 5)))
    params.add("c0", rng.normal(size=(2, 5)))
    xs = rng.normal(size=(steps, 2, 3))
    wh, wc = rng.normal(size=(2, 5)), rng.normal(size=(2, 5))

    def loss():
        h, c = params["h0"], params["c0"]
        caches = []
        for x in xs:
            h, c, cache = cell.forward(x, h, c)
            caches.append(cache)
        dh, dc = wh, wc
        for cache in reversed(caches):
            _, dh, dc = cell.backward(dh, dc, cache)
        params.accumulate("h0", dh)
        params.accumulate("c0", dc)
        return float(np.sum(h * wh) + np.sum(c * wc))

    assert grad_check(loss, params, num_coords=80) < 1e-4


def test_mse_values_and_gradient(rng):
    pred = rng.normal(size=(3, 4))
    assert mse_loss(pred, pred)[0] == 0
    value, grad = mse_loss(pred + 2.0, pred)
    assert value == pytest.approx(4.0)
    np.testing.assert_allclose(grad, 2 * 2.0 / pred.size)
    with pytest.raises(ShapeMismatchError):
        mse_loss(pred, pred[:2])


def test_mse_gradient_check(rng):
    params = ParamSet(np.float64)
    params.add("pred", rng.normal(size=(4, 3)))
    target = rng.normal(size=(4, 3))

    def loss():
        value, grad = mse_loss(params["pred"], target)
        params.accumulate("pred", grad)
        return value

    assert grad_check(loss, params, num_coords=12) < 1e-4


def _scalar_params(value: float) -> ParamSet:
    params = ParamSet(np.float64)
    params.add("p", np.array([value]))
    return params


def test_adamw_zero_gradient_no_decay_is_identity():
    params = _scalar_params(0.7)
    opt = AdamW([params], weight_decay=0.0)
    assert opt.step()
    assert params["p"][0] == 0.7


def test_adamw_first_step_magnitude():
    params = _scalar_params(0.0)
    opt = AdamW([params], lr=0.001, weight_decay=0.0)
    params.grads["p"][0] = 1.0
    opt.step()
    assert params["p"][0] == pytest.approx(-0.001, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(
    value=st.floats(min_value=-5, max_value=5),
    lr=st.floats(min_value=1e-4, max_value=1e-1),
    wd=st.floats(min_value=0.0, max_value=0.5),
)
def test_adamw_decoupled_decay(value, lr, wd):
    params = _scalar_params(value)
    AdamW([params], lr=lr, weight_decay=wd).step()
    assert params["p"][0] == pytest.approx(value * (1 - lr * wd), abs=1e-12)


def test_adamw_skips_non_finite_gradient():
    params = _scalar_params(1.0)
    opt = AdamW([params])
    params.grads["p"][0] = np.nan
    assert not opt.step()
    assert params["p"][0] == 1.0
    assert opt.state.skipped == 1


def test_clip_grad_norm_scales_jointly():
    a, b = _scalar_params(0.0), _scalar_params(0.0)
    a.grads["p"][0], b.grads["p"][0] = 3.0, 4.0
    assert clip_grad_norm([a, b], 1.0) == pytest.approx(5.0)
    assert a.grads["p"][0] == pytest.approx(0.6)
    assert b.grads["p"][0] == pytest.approx(0.8)


def test_checkpoint_round_trip(tmp_path, rng):
    params = ParamSet(np.float32)
    DenseStack(params, "enc", [4, 3, 2], rng)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, {"q": params}, meta={"K": 1})
    groups, meta = load_checkpoint(path)
    assert meta == {"K": 1}
    for name in params:
        np.testing.assert_array_equal(groups["q"][name], params[name])
    restored = params.copy()
    for name in restored:
        restored[name][...] = 0
    restored.load_state(groups["q"])
    for name in params:
        np.testing.assert_array_equal(restored[name], params[name])


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.npz"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
