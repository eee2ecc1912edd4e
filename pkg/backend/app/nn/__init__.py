"""Minimal differentiable core: layers, LSTM cell, AdamW, checkpoints, grad checks."""
from backend.app.nn.gradcheck import grad_check
from backend.app.nn.layers import (
    DenseStack,
    Linear,
    leaky_relu,
    leaky_relu_backward,
    linear_backward,
    linear_forward,
    mse_loss,
)
from backend.app.nn.lstm import LSTMCell
from backend.app.nn.optim import AdamW, AdamWState
from backend.app.nn.params import ParamSet, clip_grad_norm, load_checkpoint, save_checkpoint

__all__ = [
    "AdamW",
    "AdamWState",
    "DenseStack",
    "LSTMCell",
    "Linear",
    "ParamSet",
    "clip_grad_norm",
    "grad_check",
    "leaky_relu",
    "leaky_relu_backward",
    "linear_backward",
    "linear_forward",
    "load_checkpoint",
    "mse_loss",
    "save_checkpoint",
]
