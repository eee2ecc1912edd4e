"""LSTM cell with an explicit backward pass.

Gate layout along the last axis of the pre-activations is
`[input, forget, candidate, output]`:

    i = sigmoid(x Wx_i + h Wh_i + b_i)      c' = f * c + i * g
    f = sigmoid(...)                         h' = o * tanh(c')
    g = tanh(...)
    o = sigmoid(...)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from backend.app.core.errors import ShapeMismatchError
from backend.app.nn.layers import uniform_init
from backend.app.nn.params import ParamSet


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LSTMCache:
    x: np.ndarray
    h: np.ndarray
    c: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    tanh_c_new: np.ndarray


class LSTMCell:
    def __init__(
        self,
        params: ParamSet,
        name: str,
        d_in: int,
        d_h: int,
        rng: np.random.Generator,
        forget_bias: float = 1.0,
    ):
        self.params = params
        self.d_in = d_in
        self.d_h = d_h
        self.wx_name = f"{name}.Wx"
        self.wh_name = f"{name}.Wh"
        self.b_name = f"{name}.b"
        params.add(self.wx_name, uniform_init(rng, d_in, (d_in, 4 * d_h)))
        params.add(self.wh_name, uniform_init(rng, d_h, (d_h, 4 * d_h)))
        bias = np.zeros(4 * d_h)
        bias[d_h : 2 * d_h] = forget_bias
        params.add(self.b_name, bias)

    def forward(
        self, x: np.ndarray, h: np.ndarray, c: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, LSTMCache]:
        if x.shape[-1] != self.d_in or h.shape[-1] != self.d_h or c.shape != h.shape:
            raise ShapeMismatchError(
                f"lstm expects x[..., {self.d_in}], h/c[..., {self.d_h}]; "
                f"got {x.shape}, {h.shape}, {c.shape}"
            )
        p = self.params
        z = x @ p[self.wx_name] + h @ p[self.wh_name] + p[self.b_name]
        d = self.d_h
        i = sigmoid(z[..., :d])
        f = sigmoid(z[..., d : 2 * d])
        g = np.tanh(z[..., 2 * d : 3 * d])
        o = sigmoid(z[..., 3 * d :])
        c_new = f * c + i * g
        tanh_c_new = np.tanh(c_new)
        h_new = o * tanh_c_new
        return h_new, c_new, LSTMCache(x, h, c, i, f, g, o, tanh_c_new)

    def backward(
        self, dh_new: np.ndarray, dc_new: np.ndarray, cache: LSTMCache
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return `(dx, dh, dc)` and accumulate weight gradients."""
        do = dh_new * cache.tanh_c_new
        dc = dc_new + dh_new * cache.o * (1.0 - cache.tanh_c_new**2)
        di = dc * cache.g
        dg = dc * cache.i
        df = dc * cache.c
        dc_prev = dc * cache.f

        dz = np.concatenate(
            [
                di * cache.i * (1.0 - cache.i),
                df * cache.f * (1.0 - cache.f),
                dg * (1.0 - cache.g**2),
                do * cache.o * (1.0 - cache.o),
            ],
            axis=-1,
        )
        p = self.params
        dz2 = dz.reshape(-1, 4 * self.d_h)
        p.accumulate(self.wx_name, cache.x.reshape(-1, self.d_in).T @ dz2)
        p.accumulate(self.wh_name, cache.h.reshape(-1, self.d_h).T @ dz2)
        p.accumulate(self.b_name, dz2.sum(axis=0))
        dx = dz @ p[self.wx_name].T
        dh = dz @ p[self.wh_name].T
        return dx, dh, dc_prev
