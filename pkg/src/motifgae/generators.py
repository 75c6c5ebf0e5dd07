"""Seeded generators for the seven laundering motifs.

Every generator is a pure function of ``(params, seed)``. Integer ranges are
inclusive on both ends, like :func:`random.randint`, and a noise event fires
when ``rng.random() <= p``. The RNG is CPython's :class:`random.Random`
(Mersenne Twister) seeded with the sample seed.
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from motifgae.graph import GraphBuilder, LabeledGraph, PatternLabel

Range = tuple[int, int]


def _check_range(name: str, r: Range, lo_min: int = 0) -> None:
    if len(r) != 2 or r[0] > r[1] or r[0] < lo_min:
        raise ValueError(f"{name}: invalid range {r!r}")


def _check_prob(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name}: probability {p!r} outside [0, 1]")


@dataclass
class CollectorParams:
    in_range: Range = (4, 20)
    noise_prob: float = 0.3


@dataclass
class SinkParams:
    out_range: Range = (4, 20)
    noise_prob: float = 0.3


@dataclass
class CollusionParams:
    two_input_prob: float = 0.5
    multi_input_range: Range = (3, 4)
    out_range: Range = (1, 4)
    noise_prob: float = 0.3
    noise_count_range: Range = (1, 5)


@dataclass
class ScatterGatherParams:
    mid_range: Range = (4, 10)
    noise_prob: float = 0.2


@dataclass
class GatherScatterParams:
    in_range: Range = (4, 10)
    large_threshold: int = 8
    out_offset: int = 3
    small_out_range: Range = (3, 7)
    noise_prob: float = 0.2


@dataclass
class CyclicParams:
    extra_range: Range = (2, 10)
    noise_prob: float = 0.3
    noise_count_range: Range = (1, 2)


@dataclass
class BranchingParams:
    root_range: Range = (2, 3)
    p3: float = 0.08
    p0: float = 0.15
    max_depth: int = 4


@dataclass
class GeneratorParams:
    """All generator constants, grouped per pattern. Defaults are the published ones."""

    collector: CollectorParams = field(default_factory=CollectorParams)
    sink: SinkParams = field(default_factory=SinkParams)
    collusion: CollusionParams = field(default_factory=CollusionParams)
    sg: ScatterGatherParams = field(default_factory=ScatterGatherParams)
    gs: GatherScatterParams = field(default_factory=GatherScatterParams)
    cyclic: CyclicParams = field(default_factory=CyclicParams)
    branching: BranchingParams = field(default_factory=BranchingParams)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for group_name, group in self.groups().items():
            for f in dataclasses.fields(group):
                value = getattr(group, f.name)
                key = f"{group_name}.{f.name}"
                if f.name.endswith("_range"):
                    value = tuple(int(x) for x in value)
                    setattr(group, f.name, value)
                    _check_range(key, value)
                elif f.name.endswith("prob") or f.name in ("p3", "p0"):
                    _check_prob(key, float(value))
        if self.branching.max_depth < 1:
            raise ValueError("branching.max_depth must be >= 1")
        if self.branching.p3 > self.branching.p0:
            raise ValueError("branching.p3 must not exceed branching.p0")
        _check_range("collector.in_range", self.collector.in_range, 1)
        _check_range("sink.out_range", self.sink.out_range, 1)
        _check_range("collusion.out_range", self.collusion.out_range, 1)
        _check_range("collusion.multi_input_range", self.collusion.multi_input_range, 1)
        _check_range("cyclic.extra_range", self.cyclic.extra_range, 1)
        _check_range("gs.in_range", self.gs.in_range, 1)
        if self.gs.large_threshold - self.gs.out_offset < 1:
            raise ValueError("gs.large_threshold - gs.out_offset must be >= 1")

    def groups(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def to_dict(self) -> dict:
        return {name: dataclasses.asdict(g) for name, g in self.groups().items()}

    def flat(self) -> dict[str, object]:
        return {f"{g}.{k}": v for g, d in self.to_dict().items() for k, v in d.items()}

    def with_overrides(self, overrides: dict[str, object]) -> "GeneratorParams":
        """Copy with dotted-key overrides, e.g. ``{"collector.noise_prob": 0}``."""
        data = self.to_dict()
        for key, value in overrides.items():
            group, _, name = key.partition(".")
            if group not in data or name not in data[group]:
                raise KeyError(f"unknown generator parameter {key!r}")
            data[group][name] = _coerce(data[group][name], value)
        return GeneratorParams.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorParams":
        kwargs = {}
        for f in dataclasses.fields(cls):
            group_cls = type(f.default_factory())
            values = dict(data.get(f.name, {}))
            for k, v in values.items():
                if k.endswith("_range"):
                    values[k] = tuple(v)
            kwargs[f.name] = group_cls(**values)
        return cls(**kwargs)


def _coerce(default, value):
    if isinstance(default, tuple):
        if isinstance(value, str):
            value = [x for x in value.replace("[", "").replace("]", "").split(",") if x.strip()]
        return tuple(int(x) for x in value)
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int):
        return int(value)
    return float(value)


def load_params(path) -> GeneratorParams:
    """Load a JSON document (nested or dotted keys) or a flat ``key=value`` file."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        overrides = {}
        for k, v in doc.items():
            if isinstance(v, dict):
                overrides.update({f"{k}.{kk}": vv for kk, vv in v.items()})
            else:
                overrides[k] = v
    else:
        overrides = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            overrides[k.strip()] = v.strip()
    return GeneratorParams().with_overrides(overrides)


# -- generators -------------------------------------------------------------

def _bernoulli(rng: random.Random, p: float) -> bool:
    return rng.random() <= p


def gen_collector(params: GeneratorParams, seed: int) -> LabeledGraph:
    p = params.collector
    rng = random.Random(seed)
    b = GraphBuilder()
    x = b.add_node()
    n_in = rng.randint(*p.in_range)
    for s in b.add_nodes(n_in):
        b.add_edge(s, x)
    if _bernoulli(rng, p.noise_prob):
        n_out = rng.randint(1, max(1, n_in // 3))
        for r in b.add_nodes(n_out):
            b.add_edge(x, r)
    return LabeledGraph(b.build(), PatternLabel.COLLECTOR, seed, (x,))


def gen_sink(params: GeneratorParams, seed: int) -> LabeledGraph:
    # Same draw order as gen_collector so the two are exact transposes.
    p = params.sink
    rng = random.Random(seed)
    b = GraphBuilder()
    x = b.add_node()
    n_out = rng.randint(*p.out_range)
    for r in b.add_nodes(n_out):
        b.add_edge(x, r)
    if _bernoulli(rng, p.noise_prob):
        n_in = rng.randint(1, max(1, n_out // 3))
        for s in b.add_nodes(n_in):
            b.add_edge(s, x)
    return LabeledGraph(b.build(), PatternLabel.SINK, seed, (x,))


def gen_collusion(params: GeneratorParams, seed: int) -> LabeledGraph:
    p = params.collusion
    rng = random.Random(seed)
    b = GraphBuilder()
    n_in = 2 if _bernoulli(rng, p.two_input_prob) else rng.randint(*p.multi_input_range)
    n_out = rng.randint(*p.out_range)
    inputs = b.add_nodes(n_in)
    outputs = b.add_nodes(n_out)
    for i in inputs:
        for o in outputs:
            b.add_edge(i, o)
    if _bernoulli(rng, p.noise_prob):
        for nx_ in b.add_nodes(rng.randint(*p.noise_count_range)):
            b.add_edge(nx_, rng.choice(outputs))
    if _bernoulli(rng, p.noise_prob):
        for nx_ in b.add_nodes(rng.randint(*p.noise_count_range)):
            b.add_edge(rng.choice(inputs), nx_)
    return LabeledGraph(b.build(), PatternLabel.COLLUSION, seed, tuple(inputs + outputs))


def gen_scatter_gather(params: GeneratorParams, seed: int) -> LabeledGraph:
    p = params.sg
    rng = random.Random(seed)
    b = GraphBuilder()
    x, y = b.add_node(), b.add_node()
    mids = b.add_nodes(rng.randint(*p.mid_range))
    for m in mids:
        b.add_edge(x, m)
        b.add_edge(m, y)
    for m in mids:
        if _bernoulli(rng, p.noise_prob):
            b.add_edge(b.add_node(), m)
    for m in mids:
        if _bernoulli(rng, p.noise_prob):
            b.add_edge(m, b.add_node())
    return LabeledGraph(b.build(), PatternLabel.SCATTER_GATHER, seed, (x, y))


def gather_scatter_out_range(p: GatherScatterParams, n_in: int) -> Range:
    if n_in >= p.large_threshold:
        return (n_in - p.out_offset, n_in + p.out_offset)
    return p.small_out_range


def gen_gather_scatter(params: GeneratorParams, seed: int) -> LabeledGraph:
    p = params.gs
    rng = random.Random(seed)
    b = GraphBuilder()
    x = b.add_node()
    n_in = rng.randint(*p.in_range)
    n_out = rng.randint(*gather_scatter_out_range(p, n_in))
    senders = b.add_nodes(n_in)
    receivers = b.add_nodes(n_out)
    for s in senders:
        b.add_edge(s, x)
    for r in receivers:
        b.add_edge(x, r)
    for s in senders:
        if _bernoulli(rng, p.noise_prob):
            b.add_edge(s, b.add_node())
    for r in receivers:
        if _bernoulli(rng, p.noise_prob):
            b.add_edge(b.add_node(), r)
    return LabeledGraph(b.build(), PatternLabel.GATHER_SCATTER, seed, (x,))


def gen_cyclic(params: GeneratorParams, seed: int) -> LabeledGraph:
    p = params.cyclic
    rng = random.Random(seed)
    b = GraphBuilder()
    x = b.add_node()
    cycle = [x] + b.add_nodes(rng.randint(*p.extra_range))
    for u, v in zip(cycle, cycle[1:] + cycle[:1]):
        b.add_edge(u, v)
    for c in cycle:
        k = rng.randint(*p.noise_count_range)
        if _bernoulli(rng, p.noise_prob):
            for nz in b.add_nodes(k):
                b.add_edge(nz, c)
        k = rng.randint(*p.noise_count_range)
        if _bernoulli(rng, p.noise_prob):
            for nz in b.add_nodes(k):
                b.add_edge(c, nz)
    return LabeledGraph(b.build(), PatternLabel.CYCLIC, seed, (x,))


def branching_children(p: BranchingParams, u: float) -> int:
    if u <= p.p3:
        return 3
    if u <= p.p0:
        return 0
    return 2


def gen_branching(params: GeneratorParams, seed: int) -> LabeledGraph:
    p = params.branching
    rng = random.Random(seed)
    b = GraphBuilder()
    x = b.add_node()
    frontier = []
    for c in b.add_nodes(rng.randint(*p.root_range)):
        b.add_edge(x, c)
        frontier.append(c)
    depth = 1
    while frontier and depth < p.max_depth:
        nxt = []
        for node in frontier:
            for c in b.add_nodes(branching_children(p, rng.random())):
                b.add_edge(node, c)
                nxt.append(c)
        frontier = nxt
        depth += 1
    return LabeledGraph(b.build(), PatternLabel.BRANCHING, seed, (x,))


GENERATORS: dict[PatternLabel, Callable[[GeneratorParams, int], LabeledGraph]] = {
    PatternLabel.COLLECTOR: gen_collector,
    PatternLabel.SINK: gen_sink,
    PatternLabel.COLLUSION: gen_collusion,
    PatternLabel.SCATTER_GATHER: gen_scatter_gather,
    PatternLabel.GATHER_SCATTER: gen_gather_scatter,
    PatternLabel.CYCLIC: gen_cyclic,
    PatternLabel.BRANCHING: gen_branching,
}


def generate(label: PatternLabel, params: GeneratorParams, seed: int) -> LabeledGraph:
    return GENERATORS[label](params, seed)


def generate_dataset(label: PatternLabel, count: int, base_seed: int,
                     params: GeneratorParams | None = None) -> list[LabeledGraph]:
    """Sample ``i`` is generated with seed ``base_seed + i``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    params = params or GeneratorParams()
    gen = GENERATORS[label]
    return [gen(params, base_seed + i) for i in range(count)]


def split_dataset(samples: list, train_fraction: float = 0.8, seed: int = 0) -> tuple[list, list]:
    """Seeded shuffle, then the first ``round(train_fraction * n)`` items go to training."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    order = list(range(len(samples)))
    random.Random(seed).shuffle(order)
    n_train = math.floor(train_fraction * len(samples) + 0.5)
    return [samples[i] for i in order[:n_train]], [samples[i] for i in order[n_train:]]
