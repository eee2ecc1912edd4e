"""Structural graph metrics: shortest paths, betweenness and suite statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import networkx as nx
import numpy as np
from pydantic import BaseModel

from backend.app.graphs.graph import Graph

Weight = Literal["hops", "delay"]


def _nx_weight(weight: Weight) -> str | None:
    if weight not in ("hops", "delay"):
        raise ValueError(f"unknown weight mode {weight!r}")
    return "delay" if weight == "delay" else None


def all_pairs_shortest_paths(
    graph: Graph, weight: Weight = "delay", delays: np.ndarray | None = None
) -> np.ndarray:
    """Exact L x L shortest-path lengths.

    In `hops` mode every edge counts 1. `delays` overrides the stored edge
    delays (same order as `graph.edges`).
    """
    g = graph.to_networkx(delays)
    dist = nx.floyd_warshall_numpy(g, nodelist=range(graph.num_nodes), weight=_nx_weight(weight))
    return np.rint(dist).astype(np.int64)


def betweenness_centrality(graph: Graph, weight: Weight = "delay") -> np.ndarray:
    """Normalized node betweenness in [0, 1], endpoints excluded."""
    g = graph.to_networkx()
    values = nx.betweenness_centrality(g, normalized=True, weight=_nx_weight(weight), endpoints=False)
    return np.array([values[v] for v in range(graph.num_nodes)], dtype=np.float64)


def find_bottleneck_edge(graph: Graph, weight: Weight = "delay") -> int:
    """Index of the edge carrying the largest share of shortest paths."""
    g = graph.to_networkx()
    raw = nx.edge_betweenness_centrality(g, normalized=True, weight=_nx_weight(weight))
    values = {(min(u, v), max(u, v)): b for (u, v), b in raw.items()}
    ranked = sorted(graph.edge_index, key=lambda key: (-values[key], key))
    return graph.edge_index[ranked[0]]


@dataclass(frozen=True)
class GraphMetrics:
    apsp_hops: np.ndarray
    apsp_delay: np.ndarray
    diameter_hops: int
    diameter_delay: int
    betweenness: np.ndarray


def compute_metrics(graph: Graph, betweenness_weight: Weight = "delay") -> GraphMetrics:
    hops = all_pairs_shortest_paths(graph, "hops")
    delay = all_pairs_shortest_paths(graph, "delay")
    return GraphMetrics(
        apsp_hops=hops,
        apsp_delay=delay,
        diameter_hops=int(hops.max()),
        diameter_delay=int(delay.max()),
        betweenness=betweenness_centrality(graph, betweenness_weight),
    )


class MetricSummary(BaseModel):
    min: float
    max: float
    mean: float
    std: float

    @classmethod
    def of(cls, values: Iterable[float]) -> "MetricSummary":
        arr = np.asarray(list(values), dtype=np.float64)
        return cls(min=arr.min(), max=arr.max(), mean=arr.mean(), std=arr.std())


class GraphSuiteStats(BaseModel):
    count: int
    order: MetricSummary
    degree: MetricSummary
    size: MetricSummary
    diameter_hops: MetricSummary
    diameter_delay: MetricSummary
    apsp_hops: MetricSummary
    apsp_delay: MetricSummary
    node_betweenness: MetricSummary
    graph_max_betweenness: MetricSummary
    graph_mean_betweenness: MetricSummary
    # fraction of ordered pairs u != v within h hops, index h
    apsp_hops_cdf: list[float]
    apsp_hops_cdf_std: list[float]


def graph_stats(
    graphs: Sequence[Graph],
    metrics: Sequence[GraphMetrics] | None = None,
) -> GraphSuiteStats:
    """Summarize a non-empty graph suite (min/max/mean/std per metric)."""
    if not graphs:
        raise ValueError("graph_stats needs at least one graph")
    if metrics is None:
        metrics = [compute_metrics(g) for g in graphs]

    off_hops, off_delay = [], []
    for m in metrics:
        mask = ~np.eye(m.apsp_hops.shape[0], dtype=bool)
        off_hops.append(m.apsp_hops[mask])
        off_delay.append(m.apsp_delay[mask])
    pooled_hops = np.concatenate(off_hops)
    max_hops = int(pooled_hops.max())
    thresholds = np.arange(max_hops + 1)
    per_graph_cdf = np.array([(h[:, None] <= thresholds).mean(axis=0) for h in off_hops])
    pooled_cdf = (pooled_hops[:, None] <= thresholds).mean(axis=0)

    return GraphSuiteStats(
        count=len(graphs),
        order=MetricSummary.of(g.num_nodes for g in graphs),
        degree=MetricSummary.of(d for g in graphs for d in g.degrees()),
        size=MetricSummary.of(g.num_edges for g in graphs),
        diameter_hops=MetricSummary.of(m.diameter_hops for m in metrics),
        diameter_delay=MetricSummary.of(m.diameter_delay for m in metrics),
        apsp_hops=MetricSummary.of(pooled_hops),
        apsp_delay=MetricSummary.of(np.concatenate(off_delay)),
        node_betweenness=MetricSummary.of(np.concatenate([m.betweenness for m in metrics])),
        graph_max_betweenness=MetricSummary.of(m.betweenness.max() for m in metrics),
        graph_mean_betweenness=MetricSummary.of(m.betweenness.mean() for m in metrics),
        apsp_hops_cdf=pooled_cdf.tolist(),
        apsp_hops_cdf_std=per_graph_cdf.std(axis=0).tolist(),
    )


def select_example_graphs(
    graphs: Sequence[Graph], metrics: Sequence[GraphMetrics] | None = None
) -> dict[str, int]:
    """Pick suite indices with the lowest, median and highest max betweenness."""
    if metrics is None:
        metrics = [compute_metrics(g) for g in graphs]
    order = np.argsort([m.betweenness.max() for m in metrics], kind="stable")
    return {
        "balanced": int(order[0]),
        "median": int(order[len(order) // 2]),
        "bottleneck": int(order[-1]),
    }
