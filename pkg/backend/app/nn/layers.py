"""Dense layers, Leaky ReLU and MSE with explicit backward passes.

Every forward returns `(output, cache)`; the matching backward takes the
upstream gradient and the cache, accumulates parameter gradients into the
owning `ParamSet` and returns the gradient with respect to the input.
Arrays carry a leading batch axis; weights are `(d_in, d_out)`.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from backend.app.core.errors import ShapeMismatchError
from backend.app.nn.params import ParamSet

LEAKY_SLOPE = 0.01


def uniform_init(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def linear_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.shape[-1] != W.shape[0]:
        raise ShapeMismatchError(f"linear expects input dim {W.shape[0]}, got {x.shape[-1]}")
    return x @ W + b


def linear_backward(
    dy: np.ndarray, x: np.ndarray, W: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return `(dx, dW, db)` for `y = x W + b`."""
    x2 = x.reshape(-1, W.shape[0])
    dy2 = dy.reshape(-1, W.shape[1])
    return dy @ W.T, x2.T @ dy2, dy2.sum(axis=0)


def leaky_relu(x: np.ndarray, slope: float = LEAKY_SLOPE) -> np.ndarray:
    return np.where(x >= 0, x, slope * x)


def leaky_relu_backward(dy: np.ndarray, x: np.ndarray, slope: float = LEAKY_SLOPE) -> np.ndarray:
    return np.where(x >= 0, dy, slope * dy)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all elements and its gradient w.r.t. `pred`."""
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"mse shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


class Linear:
    def __init__(self, params: ParamSet, name: str, d_in: int, d_out: int, rng: np.random.Generator):
        self.params = params
        self.w_name = f"{name}.W"
        self.b_name = f"{name}.b"
        params.add(self.w_name, uniform_init(rng, d_in, (d_in, d_out)))
        params.add(self.b_name, np.zeros(d_out))

    @property
    def W(self) -> np.ndarray:
        return self.params[self.w_name]

    @property
    def b(self) -> np.ndarray:
        return self.params[self.b_name]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return linear_forward(x, self.W, self.b), x

    def backward(self, dy: np.ndarray, cache: np.ndarray) -> np.ndarray:
        dx, dW, db = linear_backward(dy, cache, self.W)
        self.params.accumulate(self.w_name, dW)
        self.params.accumulate(self.b_name, db)
        return dx


class DenseStack:
    """Fully connected layers, each followed by Leaky ReLU."""

    def __init__(
        self,
        params: ParamSet,
        name: str,
        sizes: Sequence[int],
        rng: np.random.Generator,
        slope: float = LEAKY_SLOPE,
    ):
        self.slope = slope
        self.layers = [
            Linear(params, f"{name}.{i}", d_in, d_out, rng)
            for i, (d_in, d_out) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].W.shape[1]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        caches = []
        for layer in self.layers:
            z, lin_cache = layer.forward(x)
            x = leaky_relu(z, self.slope)
            caches.append((lin_cache, z))
        return x, caches

    def backward(self, dy: np.ndarray, caches: list) -> np.ndarray:
        for layer, (lin_cache, z) in zip(reversed(self.layers), reversed(caches)):
            dy = layer.backward(leaky_relu_backward(dy, z, self.slope), lin_cache)
        return dy
