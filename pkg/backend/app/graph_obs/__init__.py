"""Learned graph observations from recurrent message passing."""
from backend.app.graph_obs.batch import GraphBatch
from backend.app.graph_obs.config import GraphObsConfig
from backend.app.graph_obs.message_passing import (
    Intermediates,
    NodeStates,
    RecurrentMessagePassing,
    StepTape,
)

__all__ = [
    "GraphBatch",
    "GraphObsConfig",
    "Intermediates",
    "NodeStates",
    "RecurrentMessagePassing",
    "StepTape",
]
