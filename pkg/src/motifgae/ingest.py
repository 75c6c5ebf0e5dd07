"""Transaction-log ingestion: CSV -> global digraph -> ego subgraphs -> model scores.

Amount and timestamp columns are accepted and ignored; only who paid whom
matters. Self-transactions are dropped and repeated sender/receiver pairs
collapse to a single edge.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

from motifgae.graph import PATTERNS, DiGraph, LabeledGraph, PatternLabel
from motifgae.nn import GaeModel
from motifgae.training import check_model_set, classify


@dataclass(frozen=True)
class TransactionRecord:
    sender: str
    receiver: str


@dataclass
class IngestStats:
    rows: int = 0
    self_loops: int = 0
    malformed: int = 0
    skipped_large: int = 0
    skipped_centers: list = field(default_factory=list)


@dataclass(frozen=True)
class CandidateSubgraph:
    center: str
    graph: DiGraph
    id_map: tuple[str, ...]

    def external(self, index: int) -> str:
        return self.id_map[index]


def parse_transactions(source: IO[str] | Iterable[str], sender_col: str = "sender",
                       receiver_col: str = "receiver",
                       stats: IngestStats | None = None) -> list[TransactionRecord]:
    stats = stats if stats is not None else IngestStats()
    reader = csv.DictReader(source)
    header = reader.fieldnames or []
    missing = [c for c in (sender_col, receiver_col) if c not in header]
    if missing:
        raise ValueError(f"missing columns: {', '.join(missing)} (header: {', '.join(header)})")
    out = []
    for row in reader:
        stats.rows += 1
        s, r = row.get(sender_col), row.get(receiver_col)
        if s is None or r is None or None in row or not s.strip() or not r.strip():
            stats.malformed += 1
            continue
        s, r = s.strip(), r.strip()
        if s == r:
            stats.self_loops += 1
            continue
        out.append(TransactionRecord(s, r))
    return out


def load_transactions(path, sender_col="sender", receiver_col="receiver", stats=None):
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_transactions(fh, sender_col, receiver_col, stats)


class LedgerGraph:
    """Global transaction graph over external account ids."""

    def __init__(self, records: Iterable[TransactionRecord]):
        pairs = {(r.sender, r.receiver) for r in records if r.sender != r.receiver}
        self.ids = sorted({x for p in pairs for x in p})
        self.index = {x: i for i, x in enumerate(self.ids)}
        self.succ: list[set[int]] = [set() for _ in self.ids]
        self.nbrs: list[set[int]] = [set() for _ in self.ids]
        for s, r in pairs:
            i, j = self.index[s], self.index[r]
            self.succ[i].add(j)
            self.nbrs[i].add(j)
            self.nbrs[j].add(i)

    def neighbourhood(self, center: int, hops: int) -> set[int]:
        seen = {center}
        frontier = deque([(center, 0)])
        while frontier:
            u, d = frontier.popleft()
            if d == hops:
                continue
            for v in self.nbrs[u]:
                if v not in seen:
                    seen.add(v)
                    frontier.append((v, d + 1))
        return seen

    def induced(self, center: int, members: set[int]) -> CandidateSubgraph:
        order = [center] + sorted((m for m in members if m != center), key=lambda m: self.ids[m])
        local = {m: k for k, m in enumerate(order)}
        edges = [(local[u], local[v]) for u in order for v in self.succ[u] if v in local]
        return CandidateSubgraph(self.ids[center], DiGraph.from_edges(len(order), edges),
                                 tuple(self.ids[m] for m in order))


def extract_ego_subgraphs(records: Iterable[TransactionRecord], hops: int = 1, max_nodes: int = 200,
                          min_degree: int = 1, centers: Iterable[str] | None = None,
                          stats: IngestStats | None = None) -> list[CandidateSubgraph]:
    """Induced subgraph on each center's undirected ``hops``-neighbourhood.

    Centers default to every account with at least ``min_degree`` distinct
    counterparties. Neighbourhoods larger than ``max_nodes`` are skipped and
    counted in ``stats.skipped_large``.
    """
    if hops not in (1, 2):
        raise ValueError("hops must be 1 or 2")
    stats = stats if stats is not None else IngestStats()
    ledger = LedgerGraph(records)
    if centers is None:
        chosen = [i for i in range(len(ledger.ids)) if len(ledger.nbrs[i]) >= min_degree]
    else:
        wanted = set(centers)
        unknown = sorted(wanted - set(ledger.index))
        if unknown:
            raise ValueError(f"unknown center ids: {', '.join(unknown[:5])}")
        chosen = sorted(ledger.index[c] for c in wanted)
    out = []
    for c in chosen:
        members = ledger.neighbourhood(c, hops)
        if len(members) > max_nodes:
            stats.skipped_large += 1
            stats.skipped_centers.append(ledger.ids[c])
            continue
        out.append(ledger.induced(c, members))
    return out


@dataclass(frozen=True)
class ScanRow:
    center: str
    best_label: PatternLabel
    best_score: float
    scores: dict
    flags: dict


def scan(candidates: Sequence[CandidateSubgraph], models: Mapping[PatternLabel, GaeModel]) -> list[ScanRow]:
    if not candidates:
        return []
    check_model_set(models)
    rows = []
    for cand in candidates:
        c = classify(cand.graph, models)
        rows.append(ScanRow(cand.center, c.argmin_label, c.best_score, c.scores, c.flags))
    rows.sort(key=lambda r: (r.best_score, r.center))
    return rows


def report_csv(rows: Sequence[ScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["center", "best_label", "best_score", *(f"flag_{l.value}" for l in PATTERNS)])
    for r in rows:
        w.writerow([r.center, r.best_label.value, f"{r.best_score:.6f}",
                    *(int(r.flags[l]) for l in PATTERNS)])
    return buf.getvalue()


def export_transactions(samples: Iterable[LabeledGraph], sink: IO[str]) -> list[str]:
    """Write samples as one CSV ledger with disjoint account ids.

    Returns the external id of each sample's first focal node.
    """
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["tx_id", "sender", "receiver", "amount", "timestamp"])
    anchors = []
    tx = 0
    for s in samples:
        prefix = f"{s.id}:"
        anchors.append(f"{prefix}{s.focal_nodes[0]}")
        for u, v in s.graph.edges:
            w.writerow([tx, f"{prefix}{u}", f"{prefix}{v}", "100.00", "2024-01-01T00:00:00"])
            tx += 1
    return anchors
