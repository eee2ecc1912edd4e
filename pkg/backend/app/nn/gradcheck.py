"""Finite-difference gradient checking for `ParamSet`-based models."""
from __future__ import annotations

from typing import Callable

import numpy as np

from backend.app.nn.params import ParamSet


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), floor)


def grad_check(
    loss_fn: Callable[[], float],
    param_sets: ParamSet | list[ParamSet],
    num_coords: int = 50,
    eps: float = 1e-5,
    rng: np.random.Generator | int | None = 0,
) -> float:
    """Compare analytic and central-difference gradients on random coordinates.

    `loss_fn` runs forward and backward, populating the gradient buffers of
    `param_sets`, and returns the scalar loss. Gradients are zeroed before
    every call. Returns the maximum relative error over the sampled coordinates.
    """
    if isinstance(param_sets, ParamSet):
        param_sets = [param_sets]
    rng = np.random.default_rng(rng)

    def run() -> float:
        for p in param_sets:
            p.zero_grad()
        return float(loss_fn())

    run()
    analytic = [{k: g.copy() for k, g in p.grads.items()} for p in param_sets]
    coords = [(i, name) for i, p in enumerate(param_sets) for name in p.values]
    sizes = np.array([param_sets[i].values[name].size for i, name in coords], dtype=np.float64)

    worst = 0.0
    for _ in range(num_coords):
        i, name = coords[rng.choice(len(coords), p=sizes / sizes.sum())]
        value = param_sets[i].values[name]
        idx = np.unravel_index(rng.integers(value.size), value.shape)
        original = value[idx]
        value[idx] = original + eps
        plus = run()
        value[idx] = original - eps
        minus = run()
        value[idx] = original
        numeric = (plus - minus) / (2 * eps)
        worst = max(worst, relative_error(float(analytic[i][name][idx]), numeric))
    run()
    return worst
