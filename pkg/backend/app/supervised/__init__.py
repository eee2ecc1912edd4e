"""Supervised shortest-path regression on learned graph observations."""
from backend.app.supervised.config import EVAL_STEPS, RegressionConfig
from backend.app.supervised.dataset import (
    RegressionDataset,
    RegressionSample,
    build_dataset,
    load_samples,
    make_sample,
    samples_for_graphs,
    save_samples,
)
from backend.app.supervised.trainer import (
    CurvePoint,
    RegressionHead,
    RegressionModel,
    StepMSE,
    evaluate_at_steps,
    saved_regression_config,
    train_regression,
    validation_loss,
)

__all__ = [
    "EVAL_STEPS",
    "CurvePoint",
    "RegressionConfig",
    "RegressionDataset",
    "RegressionHead",
    "RegressionModel",
    "RegressionSample",
    "StepMSE",
    "build_dataset",
    "evaluate_at_steps",
    "load_samples",
    "make_sample",
    "samples_for_graphs",
    "save_samples",
    "saved_regression_config",
    "train_regression",
    "validation_loss",
]
