"""Graph observation engine configuration."""
from __future__ import annotations

from pydantic import BaseModel, Field


class GraphObsConfig(BaseModel):
    hidden_dim: int = Field(default=128, ge=1)
    iterations: int = Field(default=1, ge=1)
    encoder_sizes: tuple[int, ...] = (512, 256)
    # keep every intermediate h_k instead of only h_{K-1} and h_K
    keep_all: bool = False
