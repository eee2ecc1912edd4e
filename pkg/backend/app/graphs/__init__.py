"""Fixed-degree geometric graphs, structural metrics and graph files."""
from backend.app.graphs.graph import Edge, Graph
from backend.app.graphs.generator import GraphSampler, generate_graph, generate_suite
from backend.app.graphs.metrics import (
    GraphMetrics,
    all_pairs_shortest_paths,
    betweenness_centrality,
    compute_metrics,
    find_bottleneck_edge,
    graph_stats,
    select_example_graphs,
)
from backend.app.graphs.storage import load_graph, load_suite, save_graph, save_suite

__all__ = [
    "Edge",
    "Graph",
    "GraphMetrics",
    "GraphSampler",
    "all_pairs_shortest_paths",
    "betweenness_centrality",
    "compute_metrics",
    "find_bottleneck_edge",
    "generate_graph",
    "generate_suite",
    "graph_stats",
    "load_graph",
    "load_suite",
    "save_graph",
    "save_suite",
    "select_example_graphs",
]
