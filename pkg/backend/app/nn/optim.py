"""AdamW: Adam with decoupled weight decay.

    m_t = b1 m + (1 - b1) g
    v_t = b2 v + (1 - b2) g^2
    p  <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from backend.app.nn.params import ParamSet

logger = logging.getLogger(__name__)


@dataclass
class AdamWState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    m: dict[tuple[int, str], np.ndarray] = field(default_factory=dict)
    v: dict[tuple[int, str], np.ndarray] = field(default_factory=dict)
    skipped: int = 0


class AdamW:
    def __init__(self, param_sets: list[ParamSet], **hyper):
        self.param_sets = param_sets
        self.state = AdamWState(**hyper)
        for idx, params in enumerate(param_sets):
            for name, value in params.values.items():
                self.state.m[(idx, name)] = np.zeros_like(value)
                self.state.v[(idx, name)] = np.zeros_like(value)

    def zero_grad(self) -> None:
        for params in self.param_sets:
            params.zero_grad()

    def step(self) -> bool:
        """Apply one update; returns False (and skips) on non-finite gradients."""
        if not all(p.grads_finite() for p in self.param_sets):
            self.state.skipped += 1
            logger.warning("non-finite gradient, skipping AdamW step (%d skipped)", self.state.skipped)
            return False
        s = self.state
        s.step += 1
        bc1 = 1.0 - s.beta1**s.step
        bc2 = 1.0 - s.beta2**s.step
        for idx, params in enumerate(self.param_sets):
            for name, value in params.values.items():
                grad = params.grads[name]
                m = s.m[(idx, name)]
                v = s.v[(idx, name)]
                m *= s.beta1
                m += (1.0 - s.beta1) * grad
                v *= s.beta2
                v += (1.0 - s.beta2) * grad * grad
                value *= 1.0 - s.lr * s.weight_decay
                value -= s.lr * (m / bc1) / (np.sqrt(v / bc2) + s.eps)
        return True

