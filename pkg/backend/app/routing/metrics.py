"""Episode traces, summary metrics and CSV export."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Optional

import numpy as np
from pydantic import BaseModel

from backend.app.core.errors import EmptyTraceError

if TYPE_CHECKING:
    from backend.app.routing.env import StepResult

TRACE_FIELDS = ["step", "agent", "action", "reward", "arrivals", "blocks", "drops"]


@dataclass
class StepRecord:
    step: int
    actions: np.ndarray
    rewards: np.ndarray
    arrivals: int
    blocks: int
    drops: int


@dataclass
class EpisodeTrace:
    num_agents: int
    steps: list[StepRecord] = field(default_factory=list)
    arrival_delays: list[int] = field(default_factory=list)
    # packets alive since the first step when the episode ended
    unarrived: int = 0

    def record(self, step: int, actions: np.ndarray, result: "StepResult") -> None:
        self.steps.append(
            StepRecord(
                step=step,
                actions=np.asarray(actions).copy(),
                rewards=result.rewards.copy(),
                arrivals=result.arrivals,
                blocks=result.blocks,
                drops=result.drops,
            )
        )
        self.arrival_delays.extend(result.arrival_delays)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def total_reward(self) -> float:
        return float(sum(r.rewards.sum() for r in self.steps))

    @property
    def arrivals(self) -> int:
        return sum(r.arrivals for r in self.steps)

    @property
    def blocks(self) -> int:
        return sum(r.blocks for r in self.steps)

    @property
    def drops(self) -> int:
        return sum(r.drops for r in self.steps)

    def arrivals_per_step(self) -> np.ndarray:
        return np.array([r.arrivals for r in self.steps], dtype=np.float64)


class EpisodeMetrics(BaseModel):
    mean_reward: float
    throughput: float
    mean_delay: Optional[float]
    drops_per_step: float
    arrivals: int
    blocks: int
    drops: int
    steps: int
    unarrived: int = 0


def episode_metrics(trace: EpisodeTrace) -> EpisodeMetrics:
    """Per-agent per-step reward, arrivals per step and mean arrival delay.

    `mean_delay` is None when no packet arrived.
    """
    if not trace.steps:
        raise EmptyTraceError("episode trace has no steps")
    num_steps = len(trace.steps)
    return EpisodeMetrics(
        mean_reward=trace.total_reward / (trace.num_agents * num_steps),
        throughput=trace.arrivals / num_steps,
        mean_delay=float(np.mean(trace.arrival_delays)) if trace.arrival_delays else None,
        drops_per_step=trace.drops / num_steps,
        arrivals=trace.arrivals,
        blocks=trace.blocks,
        drops=trace.drops,
        steps=num_steps,
        unarrived=trace.unarrived,
    )


def aggregate_metrics(metrics: Iterable[EpisodeMetrics]) -> dict[str, dict[str, float]]:
    """Mean and standard deviation of every numeric metric over episodes."""
    rows = [m.model_dump() for m in metrics]
    if not rows:
        raise EmptyTraceError("no episodes to aggregate")
    out: dict[str, dict[str, float]] = {}
    for key in rows[0]:
        values = [r[key] for r in rows if r[key] is not None]
        if values:
            out[key] = {"mean": float(np.mean(values)), "std": float(np.std(values))}
    out["never_arrived_fraction"] = {
        "mean": float(np.mean([r["unarrived"] > 0 for r in rows])),
        "std": 0.0,
    }
    return out


def write_trace_csv(trace: EpisodeTrace, path: str | Path) -> None:
    """One row per step and agent; the counters are the step totals."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=TRACE_FIELDS)
        w.writeheader()
        for rec in trace.steps:
            for agent, (action, reward) in enumerate(zip(rec.actions, rec.rewards)):
                w.writerow(
                    {
                        "step": rec.step,
                        "agent": agent,
                        "action": int(action),
                        "reward": float(reward),
                        "arrivals": rec.arrivals,
                        "blocks": rec.blocks,
                        "drops": rec.drops,
                    }
                )
