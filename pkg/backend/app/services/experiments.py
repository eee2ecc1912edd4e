"""Experiment runners behind the `routing-lab` subcommands.

Every runner takes a resolved `ExperimentConfig`, writes its artifacts into
`config.out` and returns a `RunResult`. `run_experiment` adds the two files
every run directory carries: `config.json` (the resolved configuration,
enough to rerun the command) and `summary.json`.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Literal, Sequence

import numpy as np
from pydantic import BaseModel, Field

from backend.app.agents import (
    DQNModel,
    TrainConfig,
    adaptation_experiment,
    evaluate,
    make_training_env,
    train,
    write_adaptation_csv,
)
from backend.app.agents.adaptation import ADAPTATION_FIELDS
from backend.app.core.config import get_config
from backend.app.core.errors import CheckpointError, MissingInputError
from backend.app.graphs import (
    Graph,
    GraphSampler,
    betweenness_centrality,
    generate_graph,
    generate_suite,
    graph_stats,
    load_suite,
    save_suite,
    select_example_graphs,
)
from backend.app.routing import EnvConfig, RoutingEnv, ShortestPathPolicy, aggregate_metrics, evaluate_policy
from backend.app.routing.config import Mode
from backend.app.supervised import (
    RegressionConfig,
    RegressionDataset,
    RegressionModel,
    build_dataset,
    evaluate_at_steps,
    load_samples,
    samples_for_graphs,
    save_samples,
    saved_regression_config,
    train_regression,
)

logger = logging.getLogger(__name__)

Command = Literal["gen-graphs", "baseline-sp", "train-sl", "eval-sl", "train-rl", "eval-rl", "adapt"]

EVAL_RL_FIELDS = [
    "policy",
    "reward",
    "reward_std",
    "delay",
    "delay_std",
    "throughput",
    "throughput_std",
    "never_arrived_fraction",
]


class ExperimentConfig(BaseModel):
    """Flags of one subcommand plus overrides for the nested domain configs.

    `env`, `train` and `regression` hold partial dicts on input; resolution
    replaces them with the complete configuration that was actually used.
    """

    command: Command
    out: Path | None = None
    seed: int = Field(default_factory=lambda: get_config().default_seed, ge=0)
    graphs: int | None = Field(default=None, ge=1)
    num_nodes: int = Field(default=20, ge=2)
    degree: int = Field(default=3, ge=1)
    suite: Path | None = None
    dataset: Path | None = None
    save_dataset: bool = False
    checkpoints: list[Path] = Field(default_factory=list)
    mode: Mode | None = None
    mask: bool = False
    k: int | None = Field(default=None, ge=1)
    unroll: int | None = Field(default=None, ge=1)
    steps: int | None = Field(default=None, ge=1)
    warmup: int | None = Field(default=None, ge=0)
    episodes: int | None = Field(default=None, ge=1)
    episode_len: int | None = Field(default=None, ge=1)
    setting: Literal["single", "generalized"] = "generalized"
    graph_index: int | None = Field(default=None, ge=0)
    target: Literal["delay", "hops"] = "delay"
    edge: tuple[int, int] | None = None
    new_delay: int = Field(default=10, ge=1)
    change_step: int = Field(default=50, ge=0)
    control: bool = False
    env: dict[str, Any] = Field(default_factory=dict)
    train: dict[str, Any] = Field(default_factory=dict)
    regression: dict[str, Any] = Field(default_factory=dict)


@dataclass
class RunResult:
    summary: dict[str, Any]
    # (description, path) per artifact, printed by the CLI
    artifacts: list[tuple[str, Path]] = field(default_factory=list)


def _merge(base: dict, updates: dict) -> dict:
    out = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def env_config(config: ExperimentConfig, mode: Mode = "unlimited", episode_len: int = 300) -> EnvConfig:
    flags = {"mode": config.mode or mode, "episode_len": config.episode_len or episode_len}
    return EnvConfig.model_validate(_merge(flags, config.env))


def train_config(config: ExperimentConfig) -> TrainConfig:
    """Preset of the chosen setting, then CLI flags, then `config.train` overrides."""
    preset = TrainConfig.generalized() if config.setting == "generalized" else TrainConfig.single_graph()
    base = preset.model_dump()
    flags: dict[str, Any] = {"seed": config.seed, "num_nodes": config.num_nodes, "degree": config.degree}
    if config.steps is not None:
        flags["total_steps"] = config.steps
        # shortened runs still leave most of the budget for training
        flags["warmup_steps"] = min(preset.warmup_steps, config.steps // 10)
    if config.warmup is not None:
        flags["warmup_steps"] = config.warmup
    if config.unroll is not None:
        flags["unroll"] = config.unroll
    if config.k is not None:
        flags["graph_obs"] = {"iterations": config.k}
    env = {"mode": config.mode} if config.mode else {}
    if config.episode_len is not None:
        env["episode_len"] = config.episode_len
    flags["env"] = _merge(env, config.env)
    return TrainConfig.model_validate(_merge(_merge(base, flags), config.train))


def regression_config(config: ExperimentConfig) -> RegressionConfig:
    flags: dict[str, Any] = {
        "seed": config.seed,
        "num_nodes": config.num_nodes,
        "degree": config.degree,
        "target": config.target,
    }
    if config.steps is not None:
        flags["iterations"] = config.steps
    if config.unroll is not None:
        flags["unroll"] = config.unroll
    if config.k is not None:
        flags["graph_obs"] = {"iterations": config.k}
    if config.graphs is not None and config.command == "train-sl":
        flags["train_graphs"] = config.graphs
    base = RegressionConfig().model_dump()
    return RegressionConfig.model_validate(_merge(_merge(base, flags), config.regression))


def evaluated_regression_config(config: ExperimentConfig) -> RegressionConfig:
    """Regression settings for eval-sl with the target and scale the checkpoints were trained with.

    Checkpoints that disagree with each other are rejected, and so is an
    explicitly requested target or scale that differs from theirs.
    """
    reg = regression_config(config)
    saved = {(c.target, c.target_scale) for c in map(saved_regression_config, _checkpoints(config)) if c}
    if not saved:
        return reg
    if len(saved) > 1:
        raise CheckpointError(f"checkpoints were trained with different (target, scale): {sorted(saved)}")
    ((target, scale),) = saved
    if ("target" in config.model_fields_set or "target" in config.regression) and reg.target != target:
        raise CheckpointError(f"checkpoints predict {target} distances, evaluation asked for {reg.target}")
    if "target_scale" in config.regression and reg.target_scale != scale:
        raise CheckpointError(f"checkpoints were trained with target scale {scale}, not {reg.target_scale}")
    return reg.model_copy(update={"target": target, "target_scale": scale})


def resolve(config: ExperimentConfig) -> ExperimentConfig:
    """Fill in the output directory and the complete nested configs."""
    out = config.out or get_config().output_dir / config.command
    updates: dict[str, Any] = {"out": out}
    if config.command == "train-rl":
        updates["train"] = train_config(config).model_dump(mode="json")
    elif config.command == "train-sl":
        updates["regression"] = regression_config(config).model_dump(mode="json")
    elif config.command == "eval-sl":
        reg = evaluated_regression_config(config)
        updates["regression"] = reg.model_dump(mode="json")
        updates["target"] = reg.target
    elif config.command in ("baseline-sp", "eval-rl", "adapt"):
        mode = "limited" if config.command == "adapt" else "unlimited"
        updates["env"] = env_config(config, mode).model_dump(mode="json")
    return config.model_copy(update=updates)


def _write_csv(path: Path, fieldnames: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=list(fieldnames))
        w.writeheader()
        w.writerows(rows)


def _write_json(path: Path, payload: Any) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise MissingInputError(f"no {what} given")
    if not path.exists():
        raise MissingInputError(f"{what} {path} does not exist")
    return path


def _load_suite(path: Path | None) -> list[Graph]:
    path = _require(path, "graph suite")
    try:
        return load_suite(path)
    except FileNotFoundError as exc:
        raise MissingInputError(str(exc)) from exc


def _test_graphs(config: ExperimentConfig) -> list[Graph]:
    """The `--suite` graphs, or a freshly generated suite of `--graphs` graphs."""
    if config.suite is not None:
        return _load_suite(config.suite)
    return generate_suite(config.graphs or 1000, config.num_nodes, config.degree, seed=config.seed)


def _single_graph(config: ExperimentConfig) -> Graph:
    if config.suite is None:
        return generate_graph(config.num_nodes, config.degree, rng=config.seed)
    graphs = _load_suite(config.suite)
    index = config.graph_index or 0
    if index >= len(graphs):
        raise MissingInputError(f"suite {config.suite} has {len(graphs)} graphs, no index {index}")
    return graphs[index]


def _checkpoints(config: ExperimentConfig) -> list[Path]:
    if not config.checkpoints:
        raise MissingInputError("no checkpoint given")
    return [_require(p, "checkpoint") for p in config.checkpoints]


def cmd_gen_graphs(config: ExperimentConfig) -> RunResult:
    count = config.graphs or 1000
    graphs = generate_suite(count, config.num_nodes, config.degree, seed=config.seed)
    paths = save_suite(config.out, graphs)
    stats = graph_stats(graphs)
    _write_json(config.out / "stats.json", stats.model_dump(mode="json"))
    examples = select_example_graphs(graphs)
    cdf = stats.apsp_hops_cdf
    summary = {
        "count": count,
        "diameter_hops_mean": stats.diameter_hops.mean,
        "apsp_hops_mean": stats.apsp_hops.mean,
        "pairs_within_8_hops": cdf[min(8, len(cdf) - 1)],
        "examples": examples,
    }
    return RunResult(summary, [(f"{len(paths)} graphs", config.out), ("suite statistics", config.out / "stats.json")])


def cmd_baseline_sp(config: ExperimentConfig) -> RunResult:
    """Mean shortest-path throughput per suite graph in both modes."""
    graphs = _load_suite(config.suite)
    episodes = config.episodes or 100
    base = EnvConfig.model_validate(config.env)
    policy = ShortestPathPolicy()
    rows = []
    for i, graph in enumerate(graphs):
        row: dict[str, Any] = {"graph": i}
        for mode in ("unlimited", "limited"):
            env = base.model_copy(update={"mode": mode})
            metrics = evaluate_policy(policy, [graph], env, episodes, config.seed)
            row[f"throughput_{mode}"] = float(np.mean([m.throughput for m in metrics]))
        row["max_betweenness"] = float(betweenness_centrality(graph).max())
        rows.append(row)
        if (i + 1) % 100 == 0:
            logger.info("baseline: %d/%d graphs", i + 1, len(graphs))
    path = config.out / "baseline_sp.csv"
    _write_csv(path, ["graph", "throughput_unlimited", "throughput_limited", "max_betweenness"], rows)
    summary = {
        "graphs": len(graphs),
        "episodes": episodes,
        "throughput_unlimited": float(np.mean([r["throughput_unlimited"] for r in rows])),
        "throughput_limited": float(np.mean([r["throughput_limited"] for r in rows])),
    }
    return RunResult(summary, [(f"throughput of {len(graphs)} graphs", path)])


def cmd_train_sl(config: ExperimentConfig) -> RunResult:
    reg = RegressionConfig.model_validate(config.regression)
    artifacts = []
    if config.dataset is not None:
        samples = load_samples(_require(config.dataset, "dataset"))
        split = len(samples) - min(reg.val_graphs, len(samples) - 1)
        dataset = RegressionDataset(samples[:split], samples[split:])
    else:
        env = RoutingEnv(GraphSampler(reg.num_nodes, reg.degree), EnvConfig(), seed=reg.seed)
        dataset = build_dataset(reg.train_graphs + reg.val_graphs, env, reg.val_graphs, reg.target)
        if config.save_dataset:
            path = config.out / "dataset.npz"
            save_samples(path, dataset.train + dataset.validation)
            artifacts.append((f"{len(dataset.train) + len(dataset.validation)} samples", path))
    model, curves = train_regression(dataset, reg)
    curve_path = config.out / "curves.csv"
    _write_csv(curve_path, ["iteration", "train_loss", "val_loss"], [p.model_dump() for p in curves])
    model_path = config.out / "model.npz"
    model.save(model_path, reg)
    artifacts += [(f"{len(curves)} loss points", curve_path), ("regression model", model_path)]
    val = [p.val_loss for p in curves if p.val_loss is not None]
    summary = {
        "iterations": reg.iterations,
        "train_samples": len(dataset.train),
        "final_train_loss": curves[-1].train_loss,
        "final_val_loss": val[-1] if val else None,
    }
    return RunResult(summary, artifacts)


def cmd_eval_sl(config: ExperimentConfig) -> RunResult:
    """MSE at every evaluation step, mean and std over the given checkpoints."""
    reg = RegressionConfig.model_validate(config.regression)
    checkpoints = _checkpoints(config)
    samples = samples_for_graphs(_test_graphs(config), EnvConfig(), reg.target, config.seed)
    per_model = []
    long_rows = []
    for path in checkpoints:
        model = RegressionModel.load(path)
        results = evaluate_at_steps(model, samples, reg.eval_steps, reg.target_scale)
        per_model.append([r.mse for r in results])
        long_rows += [{"checkpoint": str(path), **r.model_dump()} for r in results]
    steps = sorted(set(reg.eval_steps))
    mse = np.asarray(per_model)
    rows = [
        {"step": t, "mse": float(mse[:, j].mean()), "mse_std": float(mse[:, j].std()), "models": len(checkpoints)}
        for j, t in enumerate(steps)
    ]
    table = config.out / "eval_sl.csv"
    _write_csv(table, ["step", "mse", "mse_std", "models"], rows)
    detail = config.out / "eval_sl_models.csv"
    _write_csv(detail, ["checkpoint", "step", "mse", "mse_scaled"], long_rows)
    summary = {"graphs": len(samples), "mse": {str(r["step"]): r["mse"] for r in rows}}
    return RunResult(summary, [(f"MSE at {len(steps)} steps", table), (f"{len(checkpoints)} model rows", detail)])


def cmd_train_rl(config: ExperimentConfig) -> RunResult:
    tc = TrainConfig.model_validate(config.train)
    artifacts = []
    if tc.use_graph_obs:
        env = make_training_env(tc)
    else:
        graph = _single_graph(config)
        graph_dir = config.out / "graph"
        save_suite(graph_dir, [graph])
        artifacts.append(("training graph", graph_dir))
        env = make_training_env(tc, graph=graph)
    result = train(env, tc, checkpoint_dir=config.out / "checkpoints")
    model_path = config.out / "model.npz"
    result.model.save(model_path, tc, {"step": tc.total_steps})
    episodes_path = config.out / "episodes.csv"
    _write_csv(
        episodes_path,
        ["episode", "step", "mean_reward", "arrivals", "epsilon"],
        [e.model_dump() for e in result.episodes],
    )
    losses_path = config.out / "losses.csv"
    _write_csv(losses_path, ["iteration", "step", "loss"], [p.model_dump() for p in result.losses])
    artifacts += [
        (f"{len(result.checkpoints)} checkpoints", config.out / "checkpoints"),
        ("model", model_path),
        (f"{len(result.episodes)} episode rewards", episodes_path),
        (f"{len(result.losses)} losses", losses_path),
    ]
    recent = [e.mean_reward for e in result.episodes[-100:]]
    summary = {
        "setting": config.setting,
        "steps": tc.total_steps,
        "episodes": len(result.episodes),
        "iterations": result.learner.iterations,
        "recent_mean_reward": float(np.mean(recent)) if recent else None,
        "final_loss": result.losses[-1].loss if result.losses else None,
    }
    return RunResult(summary, artifacts)


def _metric_row(policy: str, agg: dict[str, dict[str, float]], mask: bool) -> dict[str, Any]:
    none = {"mean": None, "std": None}
    row = {
        "policy": policy,
        "reward": agg["mean_reward"]["mean"],
        "reward_std": agg["mean_reward"]["std"],
        "delay": agg.get("mean_delay", none)["mean"],
        "delay_std": agg.get("mean_delay", none)["std"],
        "throughput": agg["throughput"]["mean"],
        "throughput_std": agg["throughput"]["std"],
        "never_arrived_fraction": agg["never_arrived_fraction"]["mean"],
    }
    if mask:
        row["drops_per_step"] = agg["drops_per_step"]["mean"]
        row["drops_per_step_std"] = agg["drops_per_step"]["std"]
    return row


def cmd_eval_rl(config: ExperimentConfig) -> RunResult:
    """Greedy evaluation of every checkpoint and the shortest-path baseline.

    Per-model rows carry the std over episodes; the `mean` row carries the
    std of the per-model means.
    """
    checkpoints = _checkpoints(config)
    graphs = _test_graphs(config)
    env = EnvConfig.model_validate(config.env)
    episodes = config.episodes or 1
    rows = []
    for path in checkpoints:
        model = DQNModel.load(path)
        metrics = evaluate(model, graphs, env, episodes, mask=config.mask, seed=config.seed)
        rows.append(_metric_row(str(path), aggregate_metrics(metrics), config.mask))

    if len(rows) > 1:
        mean_row: dict[str, Any] = {"policy": "mean"}
        for key in ("reward", "delay", "throughput", "drops_per_step"):
            values = [r[key] for r in rows if r.get(key) is not None]
            if key in rows[0]:
                mean_row[key] = float(np.mean(values)) if values else None
                mean_row[f"{key}_std"] = float(np.std(values)) if values else None
        mean_row["never_arrived_fraction"] = float(np.mean([r["never_arrived_fraction"] for r in rows]))
        rows.append(mean_row)

    sp = ShortestPathPolicy()
    sp_row = _metric_row(sp.name, aggregate_metrics(evaluate_policy(sp, graphs, env, episodes, config.seed)), False)
    if config.mask:
        sp_row.update(drops_per_step=0.0, drops_per_step_std=0.0)
    rows.append(sp_row)

    fields = EVAL_RL_FIELDS + (["drops_per_step", "drops_per_step_std"] if config.mask else [])
    path = config.out / "eval_rl.csv"
    _write_csv(path, fields, rows)
    summary = {
        "graphs": len(graphs),
        "episodes": episodes,
        "mode": env.mode,
        "mask": config.mask,
        "models": len(checkpoints),
        "throughput": rows[-2]["throughput"],
        "throughput_sp": sp_row["throughput"],
    }
    return RunResult(summary, [(f"{len(rows)} policy rows", path)])


def cmd_adapt(config: ExperimentConfig) -> RunResult:
    (checkpoint, *_) = _checkpoints(config)
    model = DQNModel.load(checkpoint)
    graph = _single_graph(config)
    env = EnvConfig.model_validate(config.env)
    series = adaptation_experiment(
        model,
        graph,
        edge=config.edge,
        new_delay=config.new_delay,
        change_step=config.change_step,
        episodes=config.episodes or 100,
        episode_len=env.episode_len,
        mode=env.mode,
        control=config.control,
        mask=config.mask,
        seed=config.seed,
    )
    path = config.out / "adaptation.csv"
    write_adaptation_csv(series, path)
    diff = np.asarray(series.node_state_diff)
    series_fields = set(ADAPTATION_FIELDS) - {"step"}
    summary = series.model_dump(exclude=series_fields)
    spread = [name for name in ADAPTATION_FIELDS if name.endswith("_std")]
    summary["mean_std"] = {name.removesuffix("_std"): float(np.mean(getattr(series, name))) for name in spread}
    summary["peak_diff_step"] = int(diff.argmax()) if diff.size else None
    return RunResult(summary, [(f"{len(series.throughput_model)} steps", path)])


COMMANDS: dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "gen-graphs": cmd_gen_graphs,
    "baseline-sp": cmd_baseline_sp,
    "train-sl": cmd_train_sl,
    "eval-sl": cmd_eval_sl,
    "train-rl": cmd_train_rl,
    "eval-rl": cmd_eval_rl,
    "adapt": cmd_adapt,
}


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Resolve `config`, run its command and record config and summary."""
    config = resolve(config)
    config.out.mkdir(parents=True, exist_ok=True)
    config_path = config.out / "config.json"
    _write_json(config_path, config.model_dump(mode="json"))
    logger.info("%s: writing to %s (seed %d)", config.command, config.out, config.seed)
    result = COMMANDS[config.command](config)
    summary_path = config.out / "summary.json"
    _write_json(summary_path, result.summary)
    result.artifacts += [("resolved config", config_path), ("summary", summary_path)]
    return result
