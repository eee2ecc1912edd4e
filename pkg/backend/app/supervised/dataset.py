"""Regression samples: node observations of a reset environment and APSP targets."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from backend.app.core.errors import GraphFormatError
from backend.app.graphs import Graph, all_pairs_shortest_paths, load_graph, save_graph
from backend.app.graphs.metrics import Weight
from backend.app.routing import EnvConfig, RoutingEnv

logger = logging.getLogger(__name__)

DATASET_VERSION = "routing-lab-regression/1"


@dataclass
class RegressionSample:
    graph: Graph
    node_obs: np.ndarray
    targets: np.ndarray


@dataclass
class RegressionDataset:
    train: list[RegressionSample]
    validation: list[RegressionSample]


def make_sample(env: RoutingEnv, target: Weight = "delay", seed: int | None = None) -> RegressionSample:
    obs = env.reset(seed)
    return RegressionSample(env.graph, obs.node_obs, all_pairs_shortest_paths(env.graph, target).astype(np.float64))


def build_dataset(
    count: int,
    env: RoutingEnv,
    validation: int = 0,
    target: Weight = "delay",
) -> RegressionDataset:
    """Draw `count` samples by resetting `env`; the last `validation` are held out.

    `env` should resample its graph on reset (a `GraphSampler` source).
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if not 0 <= validation < count:
        raise ValueError(f"validation split {validation} must be smaller than count {count}")
    samples = []
    for i in range(count):
        samples.append(make_sample(env, target))
        if (i + 1) % 1000 == 0:
            logger.info("built %d/%d regression samples", i + 1, count)
    split = count - validation
    return RegressionDataset(samples[:split], samples[split:])


def samples_for_graphs(
    graphs: Sequence[Graph], env_config: EnvConfig | None = None, target: Weight = "delay", seed: int = 0
) -> list[RegressionSample]:
    """One sample per fixed graph (test suites), seeded per graph."""
    return [make_sample(RoutingEnv(g, env_config), target, seed=seed + i) for i, g in enumerate(graphs)]


def save_samples(path: str | Path, samples: Sequence[RegressionSample]) -> None:
    header = {"version": DATASET_VERSION, "graphs": [json.loads(save_graph(s.graph)) for s in samples]}
    with open(path, "wb") as fh:
        np.savez(
            fh,
            header=np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8),
            node_obs=np.stack([s.node_obs for s in samples]),
            targets=np.stack([s.targets for s in samples]),
        )


def load_samples(path: str | Path) -> list[RegressionSample]:
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(bytes(data["header"]).decode("utf-8"))
            node_obs, targets = data["node_obs"], data["targets"]
    except (OSError, KeyError, ValueError) as exc:
        raise GraphFormatError(f"cannot read dataset {path}: {exc}") from exc
    if header.get("version") != DATASET_VERSION:
        raise GraphFormatError(f"unsupported dataset version {header.get('version')!r}")
    graphs = [load_graph(json.dumps(doc)) for doc in header["graphs"]]
    return [RegressionSample(g, m, t) for g, m, t in zip(graphs, node_obs, targets)]
