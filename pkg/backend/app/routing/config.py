"""Routing environment configuration."""
from __future__ import annotations

from typing import Literal, Union

from pydantic import BaseModel, Field, model_validator

Mode = Literal["unlimited", "limited"]


class DelayOverride(BaseModel):
    """Set the delay of `edge` (index or `(u, v)` pair) to `delay` from `at_step` on."""

    edge: Union[int, tuple[int, int]]
    delay: int = Field(ge=1)
    at_step: int = Field(ge=0)


class EnvConfig(BaseModel):
    num_packets: int = Field(default=20, ge=1)
    mode: Mode = "unlimited"
    arrival_reward: float = 10.0
    block_penalty: float = -0.2
    episode_len: int = Field(default=300, ge=1)
    # observation scaling: delays / delay_norm, packet counts / num_packets
    delay_norm: float = Field(default=10.0, gt=0)
    delay_overrides: list[DelayOverride] = Field(default_factory=list)

    @model_validator(mode="after")
    def _sorted_overrides(self) -> "EnvConfig":
        self.delay_overrides.sort(key=lambda o: o.at_step)
        return self
