"""Experiment orchestration used by the command-line entry point."""
from backend.app.services.experiments import (
    COMMANDS,
    ExperimentConfig,
    RunResult,
    regression_config,
    resolve,
    run_experiment,
    train_config,
)

__all__ = [
    "COMMANDS",
    "ExperimentConfig",
    "RunResult",
    "regression_config",
    "resolve",
    "run_experiment",
    "train_config",
]
