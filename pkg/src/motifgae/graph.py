"""Directed simple graphs, pattern labels and the JSONL dataset format."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np


class GraphError(ValueError):
    """Raised when an operation would break the simple-digraph invariants."""


class DatasetFormatError(ValueError):
    def __init__(self, line: int, field_name: str, message: str):
        super().__init__(f"line {line}: field {field_name!r}: {message}")
        self.line = line
        self.field = field_name


class PatternLabel(enum.Enum):
    COLLECTOR = "collector"
    SINK = "sink"
    COLLUSION = "collusion"
    SCATTER_GATHER = "scatter-gather"
    GATHER_SCATTER = "gather-scatter"
    CYCLIC = "cyclic"
    BRANCHING = "branching"

    @classmethod
    def parse(cls, name: str) -> "PatternLabel":
        key = name.strip().lower().replace("_", "-")
        aliases = {"sg": "scatter-gather", "gs": "gather-scatter",
                   "scattergather": "scatter-gather", "gatherscatter": "gather-scatter"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown pattern {name!r}; valid names: {valid}") from None


PATTERNS: tuple[PatternLabel, ...] = tuple(PatternLabel)


@dataclass(frozen=True)
class DiGraph:
    """Immutable simple directed graph on dense node ids ``0..node_count-1``.

    Edges are kept as a sorted tuple of ``(src, dst)`` pairs so equality and
    serialization do not depend on insertion order.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.node_count < 0:
            raise GraphError("node_count must be non-negative")
        seen = set()
        for u, v in self.edges:
            _check_edge(self.node_count, u, v)
            seen.add((u, v))
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "DiGraph":
        return cls(node_count, tuple((int(u), int(v)) for u, v in edges))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_set

    @property
    def _edge_set(self) -> frozenset:
        cached = self.__dict__.get("_edge_set_cache")
        if cached is None:
            cached = frozenset(self.edges)
            object.__setattr__(self, "_edge_set_cache", cached)
        return cached

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency, ``A[u, v] = 1`` iff ``u -> v``."""
        a = np.zeros((self.node_count, self.node_count))
        if self.edges:
            idx = np.asarray(self.edges)
            a[idx[:, 0], idx[:, 1]] = 1.0
        return a

    def reversed(self) -> "DiGraph":
        return DiGraph(self.node_count, tuple((v, u) for u, v in self.edges))

    def relabeled(self, perm) -> "DiGraph":
        """Node ``i`` becomes ``perm[i]``."""
        return DiGraph(self.node_count, tuple((int(perm[u]), int(perm[v])) for u, v in self.edges))


def _check_edge(n: int, u: int, v: int) -> None:
    if u == v:
        raise GraphError(f"self-loop ({u},{v}) not allowed")
    if not (0 <= u < n and 0 <= v < n):
        raise GraphError(f"edge ({u},{v}) out of range for {n} nodes")


def add_edge(g: DiGraph, src: int, dst: int) -> DiGraph:
    """Return ``g`` with ``src -> dst`` added; a no-op if the edge exists."""
    _check_edge(g.node_count, src, dst)
    if g.has_edge(src, dst):
        return g
    return DiGraph(g.node_count, g.edges + ((src, dst),))


def degree_vectors(g: DiGraph) -> tuple[np.ndarray, np.ndarray]:
    in_deg = np.zeros(g.node_count, dtype=np.int64)
    out_deg = np.zeros(g.node_count, dtype=np.int64)
    for u, v in g.edges:
        out_deg[u] += 1
        in_deg[v] += 1
    return in_deg, out_deg


class GraphBuilder:
    """Mutable single-owner accumulator used by the generators."""

    def __init__(self):
        self.node_count = 0
        self._edges: dict[tuple[int, int], None] = {}

    def add_node(self) -> int:
        self.node_count += 1
        return self.node_count - 1

    def add_nodes(self, k: int) -> list[int]:
        return [self.add_node() for _ in range(k)]

    def add_edge(self, u: int, v: int) -> None:
        _check_edge(self.node_count, u, v)
        self._edges[(u, v)] = None

    def build(self) -> DiGraph:
        return DiGraph(self.node_count, tuple(self._edges))


@dataclass(frozen=True)
class LabeledGraph:
    graph: DiGraph
    label: PatternLabel
    seed: int
    focal_nodes: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.focal_nodes:
            raise GraphError("focal_nodes must be non-empty")
        for f in self.focal_nodes:
            if not 0 <= f < self.graph.node_count:
                raise GraphError(f"focal node {f} not in graph")
        if not 0 <= self.seed < 2**64:
            raise GraphError("seed must be a 64-bit unsigned integer")

    @property
    def id(self) -> str:
        return f"{self.label.value}-{self.seed}"


# -- JSONL dataset format ---------------------------------------------------

def to_record(sample: LabeledGraph) -> dict:
    return {
        "id": sample.id,
        "label": sample.label.value,
        "seed": sample.seed,
        "nodes": sample.graph.node_count,
        "edges": [list(e) for e in sample.graph.edges],
        "focal": list(sample.focal_nodes),
    }


def dumps_sample(sample: LabeledGraph) -> str:
    return json.dumps(to_record(sample), separators=(",", ":"))


def write_dataset(samples: Iterable[LabeledGraph], sink: IO[str]) -> int:
    count = 0
    for s in samples:
        sink.write(dumps_sample(s))
        sink.write("\n")
        count += 1
    return count


def _field(rec: dict, name: str, lineno: int):
    if name not in rec:
        raise DatasetFormatError(lineno, name, "missing")
    return rec[name]


def parse_record(line: str, lineno: int = 1) -> LabeledGraph:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(lineno, "<json>", str(exc)) from None
    if not isinstance(rec, dict):
        raise DatasetFormatError(lineno, "<json>", "expected an object")
    try:
        label = PatternLabel.parse(str(_field(rec, "label", lineno)))
    except ValueError as exc:
        raise DatasetFormatError(lineno, "label", str(exc)) from None
    seed = _field(rec, "seed", lineno)
    nodes = _field(rec, "nodes", lineno)
    edges = _field(rec, "edges", lineno)
    focal = _field(rec, "focal", lineno)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise DatasetFormatError(lineno, "seed", "expected integer")
    if not isinstance(nodes, int) or isinstance(nodes, bool):
        raise DatasetFormatError(lineno, "nodes", "expected integer")
    if not isinstance(edges, list) or not all(
        isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e) for e in edges
    ):
        raise DatasetFormatError(lineno, "edges", "expected list of [src, dst] integer pairs")
    if not isinstance(focal, list) or not all(isinstance(x, int) for x in focal):
        raise DatasetFormatError(lineno, "focal", "expected list of integers")
    try:
        graph = DiGraph.from_edges(nodes, edges)
    except GraphError as exc:
        raise DatasetFormatError(lineno, "edges", str(exc)) from None
    try:
        return LabeledGraph(graph, label, seed, tuple(focal))
    except GraphError as exc:
        raise DatasetFormatError(lineno, "focal", str(exc)) from None


def read_dataset(source: IO[str] | Iterable[str]) -> list[LabeledGraph]:
    out = []
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        out.append(parse_record(line, lineno))
    return out


def save_dataset(samples: Iterable[LabeledGraph], path) -> int:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        return write_dataset(samples, fh)


def load_dataset(path) -> list[LabeledGraph]:
    with open(path, encoding="utf-8") as fh:
        return read_dataset(fh)
