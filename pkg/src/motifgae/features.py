"""Structural node features: nine centrality-style measures per node.

Distance-based measures (closeness, harmonic, betweenness) work on the
directed graph, closeness and harmonic with *incoming* distances. Second
order and Laplacian centrality use the underlying undirected graph.
Unreachable pairs contribute nothing and neighbour-less nodes score 0.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path

from motifgae.graph import DiGraph, degree_vectors

COLUMNS: tuple[str, ...] = (
    "in_degree", "out_degree", "closeness", "betweenness", "harmonic",
    "second_order", "laplacian", "constraint", "reciprocity",
)
N_FEATURES = len(COLUMNS)


class SingularChainError(ArithmeticError):
    pass


def _distances(g: DiGraph) -> np.ndarray:
    """``D[u, v]`` = length of the shortest directed path ``u -> v`` (inf if none)."""
    if g.node_count == 0:
        return np.zeros((0, 0))
    return shortest_path(g.adjacency(), method="D", directed=True, unweighted=True)


def _undirected(g: DiGraph) -> np.ndarray:
    a = g.adjacency()
    return np.maximum(a, a.T)


def closeness(g: DiGraph) -> np.ndarray:
    """Incoming closeness scaled by the reachable fraction (Wasserman-Faust)."""
    n = g.node_count
    out = np.zeros(n)
    if n <= 1:
        return out
    d = _distances(g)
    for u in range(n):
        col = d[:, u]
        reach = np.isfinite(col)
        reach[u] = False
        r = int(reach.sum())
        if r:
            out[u] = (r / (n - 1)) * (r / col[reach].sum())
    return out


def harmonic(g: DiGraph) -> np.ndarray:
    n = g.node_count
    if n == 0:
        return np.zeros(0)
    d = _distances(g)
    with np.errstate(divide="ignore"):
        inv = 1.0 / d
    np.fill_diagonal(inv, 0.0)
    return inv.sum(axis=0)


def betweenness(g: DiGraph) -> np.ndarray:
    """Brandes shortest-path betweenness, normalized by ``(n-1)(n-2)``."""
    n = g.node_count
    succ: list[list[int]] = [[] for _ in range(n)]
    for u, v in g.edges:
        succ[u].append(v)
    cb = np.zeros(n)
    for s in range(n):
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = [0] * n
        sigma[s] = 1
        dist = [-1] * n
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in succ[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    if n < 3:
        return np.zeros(n)
    return cb / ((n - 1) * (n - 2))


def return_time_moments(adj: np.ndarray, node: int) -> tuple[float, float]:
    """Mean and variance of the return time to ``node`` of a simple random walk.

    ``adj`` is the symmetric adjacency of a connected graph. The node is made
    absorbing; ``h`` and ``s`` are the first and second moments of the hitting
    time from every other node.
    """
    n = adj.shape[0]
    deg = adj.sum(axis=1)
    others = np.array([i for i in range(n) if i != node])
    q = adj[np.ix_(others, others)] / deg[others, None]
    fundamental = np.eye(n - 1) - q
    try:
        h = np.linalg.solve(fundamental, np.ones(n - 1))
        s = np.linalg.solve(fundamental, 2.0 * h - 1.0)
    except np.linalg.LinAlgError as exc:
        raise SingularChainError(f"absorbing chain for node {node} is singular") from exc
    first_step = adj[node, others] / deg[node]
    mean = 1.0 + first_step @ h
    second = 1.0 + 2.0 * (first_step @ h) + first_step @ s
    return float(mean), float(second - mean * mean)


def second_order(g: DiGraph) -> np.ndarray:
    """Std. deviation of random-walk return times, per weakly connected component."""
    n = g.node_count
    out = np.zeros(n)
    if n == 0:
        return out
    sym = _undirected(g)
    n_comp, labels = connected_components(sym, directed=False)
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        if len(members) < 2:
            continue
        sub = sym[np.ix_(members, members)]
        for local, node in enumerate(members):
            _, var = return_time_moments(sub, local)
            out[node] = np.sqrt(max(var, 0.0))
    return out


def laplacian_energy(sym: np.ndarray) -> float:
    d = sym.sum(axis=1)
    return float((d * d).sum() + d.sum())


def laplacian_centrality(g: DiGraph) -> np.ndarray:
    n = g.node_count
    sym = _undirected(g)
    total = laplacian_energy(sym)
    if total == 0:
        return np.zeros(n)
    deg = sym.sum(axis=1)
    out = np.zeros(n)
    for v in range(n):
        d = deg - sym[:, v]
        d[v] = 0.0
        out[v] = (total - float((d * d).sum() + d.sum())) / total
    return out


def burt_constraint(g: DiGraph) -> np.ndarray:
    a = g.adjacency()
    mutual = a + a.T
    strength = mutual.sum(axis=1)
    p = np.divide(mutual, strength[:, None], out=np.zeros_like(mutual), where=strength[:, None] > 0)
    local = p + p @ p
    # p[i, i] = 0, so p @ p already skips q = i and q = j.
    return np.where(mutual > 0, local * local, 0.0).sum(axis=1)


def node_reciprocity(g: DiGraph) -> np.ndarray:
    a = g.adjacency()
    recip = (a * a.T).sum(axis=1)
    incident = a.sum(axis=0) + a.sum(axis=1)
    return np.divide(2.0 * recip, incident, out=np.zeros_like(incident), where=incident > 0)


def raw_features(g: DiGraph) -> np.ndarray:
    in_deg, out_deg = degree_vectors(g)
    cols = [
        in_deg.astype(float), out_deg.astype(float), closeness(g), betweenness(g),
        harmonic(g), second_order(g), laplacian_centrality(g), burt_constraint(g),
        node_reciprocity(g),
    ]
    return np.column_stack(cols) if g.node_count else np.zeros((0, N_FEATURES))


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    raw: np.ndarray
    col_min: np.ndarray
    col_max: np.ndarray
    column_order: tuple[str, ...] = COLUMNS


def minmax_normalize(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    scaled = np.divide(raw - lo, span, out=np.zeros_like(raw), where=span > 0)
    return np.clip(scaled, 0.0, 1.0), lo, hi


def compute_features(g: DiGraph) -> FeatureMatrix:
    """Nine structural columns, min-max normalized per graph (constant columns -> 0)."""
    if g.node_count < 1:
        raise ValueError("graph must have at least one node")
    raw = raw_features(g)
    if not np.all(np.isfinite(raw)):
        raise FloatingPointError("non-finite raw feature")
    values, lo, hi = minmax_normalize(raw)
    return FeatureMatrix(values, raw, lo, hi)


def dump_features(items: Iterable[tuple[str, FeatureMatrix]], sink: IO[str]) -> int:
    """Debug dump: one ``{graph_id, columns, rows}`` JSON object per line."""
    n = 0
    for graph_id, fm in items:
        sink.write(json.dumps({"graph_id": graph_id, "columns": list(fm.column_order),
                               "rows": fm.values.tolist()}, separators=(",", ":")))
        sink.write("\n")
        n += 1
    return n
