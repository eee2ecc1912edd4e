"""Shortest-path regression on learned graph observations.

Every node predicts its distances to all L nodes from its own graph
observation. Training unrolls J environment steps with fixed node
observations and sums the per-step MSE, so every iteration of the
recurrent state is supervised.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ValidationError

from backend.app.core.errors import CheckpointError, NonFiniteLossError, ShapeMismatchError
from backend.app.graph_obs import GraphBatch, GraphObsConfig, RecurrentMessagePassing
from backend.app.nn import AdamW, Linear, ParamSet, load_checkpoint, mse_loss, save_checkpoint
from backend.app.supervised.config import RegressionConfig
from backend.app.supervised.dataset import RegressionDataset, RegressionSample

logger = logging.getLogger(__name__)


class RegressionHead:
    """Dense layer from a graph observation to L distance predictions."""

    def __init__(self, params: ParamSet, readout_dim: int, num_nodes: int, rng: np.random.Generator):
        self.layer = Linear(params, "head", readout_dim, num_nodes, rng)

    def forward(self, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.layer.forward(psi)

    def backward(self, dy: np.ndarray, cache: np.ndarray) -> np.ndarray:
        return self.layer.backward(dy, cache)


class RegressionModel:
    def __init__(
        self,
        num_nodes: int,
        node_obs_dim: int,
        degree: int,
        config: GraphObsConfig | None = None,
        rng: np.random.Generator | int | None = None,
        dtype=np.float32,
    ):
        rng = np.random.default_rng(rng)
        self.num_nodes = num_nodes
        self.engine = RecurrentMessagePassing(node_obs_dim, degree, config, rng, dtype)
        self.head_params = ParamSet(dtype)
        self.head = RegressionHead(self.head_params, self.engine.readout_dim, num_nodes, rng)
        # settings the model was trained with, kept through save and load
        self.config: RegressionConfig | None = None

    @property
    def param_sets(self) -> list[ParamSet]:
        return [self.engine.params, self.head_params]

    def _stack(self, samples: Sequence[RegressionSample], scale: float):
        sizes = {s.graph.num_nodes for s in samples}
        if sizes != {self.num_nodes}:
            raise ShapeMismatchError(
                f"model predicts {self.num_nodes} distances, batch has graphs of sizes {sorted(sizes)}"
            )
        batch = GraphBatch.from_graphs([s.graph for s in samples])
        obs = np.concatenate([s.node_obs for s in samples])
        targets = np.concatenate([s.targets for s in samples]) / scale
        return batch, obs, targets

    def loss(
        self,
        samples: Sequence[RegressionSample],
        unroll: int,
        scale: float = 1.0,
        backward: bool = True,
    ) -> tuple[float, list[float]]:
        """Summed per-step MSE over `unroll` steps from zero node states.

        With `backward`, parameter gradients are accumulated (not zeroed).
        Returns the total and the per-step losses.
        """
        batch, obs, targets = self._stack(samples, scale)
        nodes = np.arange(batch.num_nodes)
        states = self.engine.initial_states(batch.num_nodes)
        total, per_step, records = 0.0, [], []
        for _ in range(unroll):
            states, inter, tape = self.engine.node_state_update(states, obs, batch)
            psi = self.engine.readout(inter, batch, nodes)
            pred, head_cache = self.head.forward(psi)
            value, dpred = mse_loss(pred, targets)
            total += value
            per_step.append(value)
            if backward:
                dpsi = self.head.backward(dpred, head_cache)
                records.append((tape, self.engine.readout_backward(dpsi, batch, nodes)))
        if backward:
            dh = dc = None
            for tape, injected in reversed(records):
                dh, dc, _ = self.engine.step_backward(tape, batch, injected, dh, dc)
        return total, per_step

    def predict(self, samples: Sequence[RegressionSample], steps: int, scale: float = 1.0) -> list[np.ndarray]:
        """Unscaled predictions after each of `steps` forward steps."""
        batch, obs, _ = self._stack(samples, scale)
        nodes = np.arange(batch.num_nodes)
        states = self.engine.initial_states(batch.num_nodes)
        out = []
        for _ in range(steps):
            states, inter, _ = self.engine.node_state_update(states, obs, batch)
            pred, _ = self.head.forward(self.engine.readout(inter, batch, nodes))
            out.append(pred * scale)
        return out

    def save(self, path: str | Path, config: RegressionConfig | None = None, extra: dict | None = None) -> None:
        config = config or self.config
        meta = {
            "num_nodes": self.num_nodes,
            "node_obs_dim": self.engine.node_obs_dim,
            "degree": self.engine.degree,
            "graph_obs": self.engine.config.model_dump(mode="json"),
            "regression_config": config.model_dump(mode="json") if config else None,
            **(extra or {}),
        }
        save_checkpoint(path, {"node_update": self.engine.params, "head": self.head_params}, meta)
        logger.info("checkpoint written to %s", path)

    @classmethod
    def load(cls, path: str | Path) -> "RegressionModel":
        groups, meta = load_checkpoint(path)
        try:
            graph_obs = GraphObsConfig(**meta["graph_obs"])
            model = cls(meta["num_nodes"], meta["node_obs_dim"], meta["degree"], graph_obs, rng=0)
        except KeyError as exc:
            raise CheckpointError(f"{path}: checkpoint metadata lacks {exc}") from exc
        model.config = saved_regression_config(path, meta)
        model.engine.params.load_state(groups.get("node_update", {}))
        model.head_params.load_state(groups.get("head", {}))
        return model


def saved_regression_config(path: str | Path, meta: dict | None = None) -> RegressionConfig | None:
    """Regression settings stored with a checkpoint, or None for checkpoints saved without them."""
    if meta is None:
        _, meta = load_checkpoint(path)
    saved = meta.get("regression_config")
    if saved is None:
        return None
    try:
        return RegressionConfig.model_validate(saved)
    except ValidationError as exc:
        raise CheckpointError(f"{path}: invalid regression settings: {exc}") from exc


class CurvePoint(BaseModel):
    iteration: int
    train_loss: float
    val_loss: float | None = None


class StepMSE(BaseModel):
    step: int
    mse: float
    mse_scaled: float


def evaluate_at_steps(
    model: RegressionModel,
    samples: Sequence[RegressionSample],
    steps: Sequence[int],
    scale: float = 10.0,
    chunk: int = 64,
) -> list[StepMSE]:
    """MSE of the step-t predictions for every t in `steps`, carrying node states."""
    wanted = sorted(set(steps))
    sq_err = {t: 0.0 for t in wanted}
    count = 0
    for start in range(0, len(samples), chunk):
        part = samples[start : start + chunk]
        targets = np.concatenate([s.targets for s in part])
        preds = model.predict(part, max(wanted), scale)
        for t in wanted:
            sq_err[t] += float(np.sum((preds[t - 1] - targets) ** 2))
        count += targets.size
    return [StepMSE(step=t, mse=sq_err[t] / count, mse_scaled=sq_err[t] / count / scale**2) for t in wanted]


def validation_loss(model: RegressionModel, samples: Sequence[RegressionSample], config: RegressionConfig) -> float:
    """Scaled MSE at the unroll depth on `samples`."""
    (result,) = evaluate_at_steps(model, samples, [config.unroll], config.target_scale)
    return result.mse_scaled


def train_regression(
    dataset: RegressionDataset,
    config: RegressionConfig,
    model: RegressionModel | None = None,
    rng: np.random.Generator | int | None = None,
) -> tuple[RegressionModel, list[CurvePoint]]:
    """Train the graph observation engine and head on sampled graph batches."""
    rng = np.random.default_rng(config.seed if rng is None else rng)
    train = dataset.train
    if model is None:
        first = train[0]
        model = RegressionModel(
            first.graph.num_nodes, first.node_obs.shape[1], first.graph.degree, config.graph_obs, rng
        )
    model.config = config
    opt = AdamW(model.param_sets, lr=config.lr, weight_decay=config.weight_decay)
    curves: list[CurvePoint] = []
    for it in range(1, config.iterations + 1):
        idx = rng.choice(len(train), size=min(config.batch_size, len(train)), replace=False)
        opt.zero_grad()
        loss, per_step = model.loss([train[i] for i in idx], config.unroll, config.target_scale)
        if not np.isfinite(loss):
            raise NonFiniteLossError(
                "regression loss is not finite",
                {"iteration": it, "per_step": per_step, "grad_norm": sum(p.grad_norm() for p in model.param_sets)},
            )
        opt.step()
        point = CurvePoint(iteration=it, train_loss=loss)
        if dataset.validation and (it % config.eval_every == 0 or it == config.iterations):
            point.val_loss = validation_loss(model, dataset.validation, config)
        curves.append(point)
        if it % config.log_every == 0:
            logger.info(
                "iteration %d/%d train_loss=%.4f val_loss=%s",
                it,
                config.iterations,
                loss,
                "-" if point.val_loss is None else f"{point.val_loss:.4f}",
            )
    return model, curves
