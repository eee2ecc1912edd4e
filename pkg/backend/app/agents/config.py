"""DQN training configuration and the two training presets."""
from __future__ import annotations

from pydantic import BaseModel, Field

from backend.app.graph_obs import GraphObsConfig
from backend.app.routing import EnvConfig


class TrainConfig(BaseModel):
    total_steps: int = Field(default=250_000, ge=1)
    warmup_steps: int = Field(default=10_000, ge=0)
    replay_capacity: int = Field(default=200_000, ge=1)
    train_every: int = Field(default=10, ge=1)
    batch_size: int = Field(default=32, ge=1)
    # sequence length J for backpropagation through time
    unroll: int = Field(default=1, ge=1)
    gamma: float = Field(default=0.9, ge=0.0, le=1.0)
    tau: float = Field(default=0.01, ge=0.0, le=1.0)
    lr: float = Field(default=1e-3, gt=0)
    weight_decay: float = Field(default=0.01, ge=0)
    grad_clip: float = Field(default=1.0, gt=0)
    eps_init: float = Field(default=1.0, ge=0.0, le=1.0)
    eps_decay: float = Field(default=0.996, gt=0.0, le=1.0)
    eps_min: float = Field(default=0.01, ge=0.0, le=1.0)
    eps_decay_every: int = Field(default=100, ge=1)
    use_graph_obs: bool = False
    q_hidden: tuple[int, ...] = (512, 256)
    graph_obs: GraphObsConfig = Field(default_factory=GraphObsConfig)
    env: EnvConfig = Field(default_factory=EnvConfig)
    num_nodes: int = Field(default=20, ge=2)
    degree: int = Field(default=3, ge=1)
    log_every: int = Field(default=1_000, ge=1)
    checkpoint_every: int = Field(default=0, ge=0)
    seed: int = 0

    @classmethod
    def single_graph(cls, **overrides) -> "TrainConfig":
        """Plain DQN on one fixed graph with 300-step episodes."""
        base = dict(
            total_steps=250_000,
            warmup_steps=10_000,
            eps_decay=0.996,
            unroll=1,
            use_graph_obs=False,
            env=EnvConfig(episode_len=300),
        )
        return cls(**{**base, **overrides})

    @classmethod
    def generalized(cls, **overrides) -> "TrainConfig":
        """Graph observations on a fresh random graph every 50-step episode."""
        base = dict(
            total_steps=2_500_000,
            warmup_steps=100_000,
            eps_decay=0.999,
            unroll=8,
            use_graph_obs=True,
            env=EnvConfig(episode_len=50),
        )
        return cls(**{**base, **overrides})

    def epsilon(self, step: int) -> float:
        """Exploration rate after `step` environment steps."""
        return max(self.eps_min, self.eps_init * self.eps_decay ** (step // self.eps_decay_every))
