"""JSON graph files.

A graph file holds `{L, D, positions, edges: [{u, v, delay}]}`. Schema
problems are reported with the failing location; structural problems
(wrong degree, disconnected, duplicate edges) are reported after parsing.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field, ValidationError

from backend.app.core.errors import GraphFormatError
from backend.app.graphs.graph import Edge, Graph

FORMAT_VERSION = 1


class EdgeRecord(BaseModel):
    u: int = Field(ge=0)
    v: int = Field(ge=0)
    delay: int


class GraphFile(BaseModel):
    version: int = FORMAT_VERSION
    L: int = Field(ge=1)
    D: int = Field(ge=1)
    positions: list[tuple[float, float]]
    edges: list[EdgeRecord]


def _validate(doc: GraphFile) -> Graph:
    if len(doc.positions) != doc.L:
        raise GraphFormatError(f"expected {doc.L} positions, got {len(doc.positions)}", "positions")
    seen: set[tuple[int, int]] = set()
    edges = []
    for i, rec in enumerate(doc.edges):
        where = f"edges.{i}"
        if rec.u >= doc.L or rec.v >= doc.L:
            raise GraphFormatError(f"node id out of range [0, {doc.L})", where)
        if rec.u == rec.v:
            raise GraphFormatError("self-loop", where)
        if rec.delay < 1:
            raise GraphFormatError(f"delay must be >= 1, got {rec.delay}", where)
        key = (min(rec.u, rec.v), max(rec.u, rec.v))
        if key in seen:
            raise GraphFormatError(f"duplicate edge {key}", where)
        seen.add(key)
        edges.append(Edge(key[0], key[1], rec.delay))

    graph = Graph(doc.L, doc.D, np.array(doc.positions, dtype=np.float64).reshape(doc.L, 2), tuple(edges))
    degrees = np.bincount([n for e in edges for n in (e.u, e.v)], minlength=doc.L)
    bad = np.flatnonzero(degrees != doc.D)
    if bad.size:
        v = int(bad[0])
        raise GraphFormatError(f"node {v} has degree {degrees[v]}, expected {doc.D}", "edges")
    if not nx.is_connected(graph.to_networkx()):
        raise GraphFormatError("graph is not connected", "edges")
    return graph


def save_graph(graph: Graph) -> bytes:
    doc = GraphFile(
        L=graph.num_nodes,
        D=graph.degree,
        positions=[(float(x), float(y)) for x, y in graph.positions],
        edges=[EdgeRecord(u=e.u, v=e.v, delay=e.delay) for e in graph.edges],
    )
    return doc.model_dump_json(indent=1).encode("utf-8")


def load_graph(data: bytes | str) -> Graph:
    """Parse and validate a graph file."""
    try:
        doc = GraphFile.model_validate_json(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        location = ".".join(str(p) for p in err["loc"]) or "document"
        raise GraphFormatError(err["msg"], location) from exc
    return _validate(doc)


def save_suite(directory: str | Path, graphs: Sequence[Graph]) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, g in enumerate(graphs):
        path = directory / f"graph_{i:04d}.json"
        path.write_bytes(save_graph(g))
        paths.append(path)
    return paths


def load_suite(directory: str | Path) -> list[Graph]:
    directory = Path(directory)
    paths = sorted(directory.glob("graph_*.json"))
    if not paths:
        raise FileNotFoundError(f"no graph files in {directory}")
    graphs = []
    for path in paths:
        try:
            graphs.append(load_graph(path.read_bytes()))
        except GraphFormatError as exc:
            raise GraphFormatError(str(exc), path.name) from exc
    return graphs

