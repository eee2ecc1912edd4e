"""Shortest-path regression configuration."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from backend.app.graph_obs import GraphObsConfig

EVAL_STEPS = (1, 2, 4, 8, 16, 32)


class RegressionConfig(BaseModel):
    num_nodes: int = Field(default=20, ge=2)
    degree: int = Field(default=3, ge=1)
    train_graphs: int = Field(default=10_000, ge=1)
    val_graphs: int = Field(default=500, ge=0)
    iterations: int = Field(default=5_000, ge=1)
    batch_size: int = Field(default=32, ge=1)
    unroll: int = Field(default=8, ge=1)
    lr: float = Field(default=1e-3, gt=0)
    weight_decay: float = Field(default=0.01, ge=0)
    target: Literal["delay", "hops"] = "delay"
    # targets are divided by this during training; reported MSE is unscaled
    target_scale: float = Field(default=10.0, gt=0)
    eval_every: int = Field(default=100, ge=1)
    log_every: int = Field(default=100, ge=1)
    eval_steps: list[int] = Field(default_factory=lambda: list(EVAL_STEPS))
    graph_obs: GraphObsConfig = Field(default_factory=GraphObsConfig)
    seed: int = 0
