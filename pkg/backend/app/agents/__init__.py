"""Shared-parameter DQN agents with learned graph observations."""
from backend.app.agents.adaptation import AdaptationSeries, adaptation_experiment, write_adaptation_csv
from backend.app.agents.config import TrainConfig
from backend.app.agents.dqn import DQNLearner, recompute_node_states, sequence_loss, soft_update_target
from backend.app.agents.policy import DQNPolicy, act
from backend.app.agents.qnet import DQNModel, QNetwork
from backend.app.agents.replay import ReplayMemory, Transition, TransitionBatch
from backend.app.agents.trainer import (
    EpisodeReward,
    LossPoint,
    TrainingResult,
    evaluate,
    make_training_env,
    rollout_step,
    train,
)

__all__ = [
    "AdaptationSeries",
    "DQNLearner",
    "DQNModel",
    "DQNPolicy",
    "EpisodeReward",
    "LossPoint",
    "QNetwork",
    "ReplayMemory",
    "TrainConfig",
    "TrainingResult",
    "Transition",
    "TransitionBatch",
    "act",
    "adaptation_experiment",
    "evaluate",
    "make_training_env",
    "recompute_node_states",
    "rollout_step",
    "sequence_loss",
    "soft_update_target",
    "train",
    "write_adaptation_csv",
]
