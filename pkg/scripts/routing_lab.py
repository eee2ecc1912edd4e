#!/usr/bin/env python3
"""Command-line entry point for graph generation, training and evaluation runs.

Usage:
  routing-lab gen-graphs --graphs 1000 --seed 0 --out runs/suite
  routing-lab baseline-sp --suite runs/suite --episodes 100 --out runs/sp
  routing-lab train-rl --setting generalized --steps 100000 --out runs/rl
  routing-lab eval-rl --checkpoint runs/rl/model.npz --suite runs/suite --mask

Every run directory receives `config.json`; passing it back with `--config`
reruns the command with the same settings. Exit codes: 0 success, 1 usage
errors (bad flags, invalid graph parameters, missing inputs), 2 runtime errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from backend.app.core.config import get_config
from backend.app.core.errors import InvalidGraphParameters, MissingInputError, RoutingLabError
from backend.app.core.logging import configure_logging
from backend.app.services import ExperimentConfig, run_experiment

logger = logging.getLogger(__name__)

S = argparse.SUPPRESS


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=S)
    p.add_argument("--seed", type=int, help="Base seed (default: ROUTING_LAB_DEFAULT_SEED or 0)")
    p.add_argument("--out", type=Path, help="Run directory (default: <output dir>/<command>)")
    p.add_argument("--config", type=Path, help="JSON file whose keys override the flags")
    p.add_argument("--nodes", dest="num_nodes", type=int, help="Nodes per graph (default: 20)")
    p.add_argument("--degree", type=int, help="Node degree (default: 3)")
    p.add_argument("--log-level", help="Logging level (default: ROUTING_LAB_LOG_LEVEL or INFO)")
    return p


def _episodes(p: argparse.ArgumentParser) -> None:
    p.add_argument("--episodes", type=int, help="Episodes per graph")
    p.add_argument("--episode-len", dest="episode_len", type=int, help="Steps per episode (default: 300)")


def _suite(p: argparse.ArgumentParser, graphs_help: str) -> None:
    p.add_argument("--suite", type=Path, help="Directory of graph files")
    p.add_argument("--graphs", type=int, help=graphs_help)


def _checkpoint(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--checkpoint", dest="checkpoints", type=Path, action="append", help="Model checkpoint (can be repeated)"
    )


def _recurrence(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, help="Message passing iterations per step")
    p.add_argument("--unroll", type=int, help="Steps unrolled through time")
    p.add_argument("--steps", type=int, help="Training length")


def _mode(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["unlimited", "limited"], help="Link capacity mode")
    p.add_argument("--mask", action="store_true", help="Mask visited nodes and allow drops")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="routing-lab", description="Packet routing with learned graph observations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graphs", parents=[common], argument_default=S, help="Generate a graph suite")
    p.add_argument("--graphs", type=int, help="Number of graphs (default: 1000)")

    p = sub.add_parser("baseline-sp", parents=[common], argument_default=S, help="Shortest-path throughput per graph")
    p.add_argument("--suite", type=Path, help="Directory of graph files")
    _episodes(p)

    p = sub.add_parser("train-sl", parents=[common], argument_default=S, help="Train shortest-path regression")
    _recurrence(p)
    p.add_argument("--graphs", type=int, help="Training graphs (default: 10000)")
    p.add_argument("--target", choices=["delay", "hops"], help="Regression target (default: delay)")
    p.add_argument("--dataset", type=Path, help="Saved dataset to train on instead of sampling graphs")
    p.add_argument("--save-dataset", dest="save_dataset", action="store_true", help="Write the sampled dataset")

    p = sub.add_parser("eval-sl", parents=[common], argument_default=S, help="Regression MSE per step")
    _checkpoint(p)
    _suite(p, "Test graphs to generate without --suite (default: 1000)")
    p.add_argument("--target", choices=["delay", "hops"], help="Regression target (default: delay)")

    p = sub.add_parser("train-rl", parents=[common], argument_default=S, help="Train DQN routing agents")
    _recurrence(p)
    p.add_argument("--setting", choices=["single", "generalized"], help="Training preset (default: generalized)")
    p.add_argument("--warmup", type=int, help="Steps before the first training iteration")
    p.add_argument("--mode", choices=["unlimited", "limited"], help="Link capacity mode")
    p.add_argument("--suite", type=Path, help="Suite holding the single training graph")
    p.add_argument("--graph-index", dest="graph_index", type=int, help="Graph of --suite to train on")
    p.add_argument("--episode-len", dest="episode_len", type=int, help="Steps per episode")

    p = sub.add_parser("eval-rl", parents=[common], argument_default=S, help="Evaluate DQN checkpoints")
    _checkpoint(p)
    _suite(p, "Test graphs to generate without --suite (default: 1000)")
    _mode(p)
    _episodes(p)

    p = sub.add_parser("adapt", parents=[common], argument_default=S, help="Delay change adaptation experiment")
    _checkpoint(p)
    p.add_argument("--suite", type=Path, help="Suite holding the test graph")
    p.add_argument("--graph-index", dest="graph_index", type=int, help="Graph of --suite to use")
    p.add_argument("--edge", type=int, nargs=2, metavar=("U", "V"), help="Edge to slow down (default: bottleneck)")
    p.add_argument("--new-delay", dest="new_delay", type=int, help="Delay after the change (default: 10)")
    p.add_argument("--change-step", dest="change_step", type=int, help="Step of the change (default: 50)")
    p.add_argument("--control", action="store_true", help="Run without a delay change")
    _mode(p)
    _episodes(p)
    return parser


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, Any] = {k: v for k, v in vars(args).items() if k not in ("config", "log_level")}
    config_path = getattr(args, "config", None)
    if config_path is not None:
        if not config_path.exists():
            raise MissingInputError(f"config file {config_path} does not exist")
        with open(config_path, encoding="utf-8") as fh:
            values.update(json.load(fh))
        values["command"] = args.command
    return ExperimentConfig.model_validate(values)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    configure_logging(getattr(args, "log_level", None) or get_config().log_level)

    try:
        config = _experiment_config(args)
        result = run_experiment(config)
    except (InvalidGraphParameters, MissingInputError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RoutingLabError, ValueError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return 2

    for description, path in result.artifacts:
        print(f"Wrote {description} to {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
