"""Per-pattern training, cross-pattern error matrices, thresholds and classification."""

from __future__ import annotations

import csv
import io
import logging
import math
import random
import time
from dataclasses import asdict, dataclass, field
from multiprocessing import get_context
from typing import Callable, Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from motifgae.graph import PATTERNS, DiGraph, LabeledGraph, PatternLabel
from motifgae.nn import (AdamState, GaeModel, GraphInput, adam_step, graph_loss,
                         init_model, loss_and_gradients, prepare)

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    max_epochs: int = 100
    early_stop_patience: int = 3
    batch_size: int = 25
    learning_rate: float = 1e-3
    early_stop_fraction: float = 0.1
    hidden_dim: int = 32
    latent_dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.early_stop_fraction < 1.0:
            raise ValueError("early_stop_fraction must be in (0, 1)")


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    early_stop_losses: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    wall_time: float = 0.0

    def epoch_log(self) -> list[dict]:
        return [{"epoch": i + 1, "train_loss": tr, "early_stop_loss": es}
                for i, (tr, es) in enumerate(zip(self.train_losses, self.early_stop_losses))]


# -- featurization ------------------------------------------------------------

def _prepare_graph(g: DiGraph) -> GraphInput:
    return prepare(g)


def featurize(samples: Sequence[LabeledGraph | DiGraph], threads: int = 1) -> list[GraphInput]:
    """Feature tensors for each sample, in input order."""
    graphs = [s.graph if isinstance(s, LabeledGraph) else s for s in samples]
    if threads > 1 and len(graphs) > 1:
        with get_context("fork").Pool(threads) as pool:
            return pool.map(_prepare_graph, graphs, chunksize=max(1, len(graphs) // (4 * threads)))
    return [prepare(g) for g in graphs]


def _as_inputs(items) -> list[GraphInput]:
    return [x if isinstance(x, GraphInput) else prepare(x.graph if isinstance(x, LabeledGraph) else x)
            for x in items]


# -- training -----------------------------------------------------------------

def _single_label(samples: Sequence[LabeledGraph]) -> PatternLabel:
    if not samples:
        raise ValueError("training set is empty")
    labels = {s.label for s in samples}
    if len(labels) != 1:
        raise ValueError(f"training set mixes labels: {sorted(l.value for l in labels)}")
    return labels.pop()


def batch_loss_and_gradients(model: GaeModel, batch: Sequence[GraphInput]):
    """Mean loss and mean gradient over ``batch``, summed in index order."""
    total = 0.0
    acc = {k: np.zeros_like(v) for k, v in model.params.items()}
    for gi in batch:
        loss, grads = loss_and_gradients(model, gi)
        total += loss
        for k in acc:
            acc[k] += grads[k]
    n = len(batch)
    return total / n, {k: v / n for k, v in acc.items()}


def train_model(encoder_kind: str, pattern: PatternLabel, train_set: Sequence[LabeledGraph],
                config: TrainConfig | None = None, inputs: Sequence[GraphInput] | None = None,
                evaluator: Callable[[GaeModel], float] | None = None) -> tuple[GaeModel, TrainReport]:
    """Train one autoencoder on samples of a single pattern.

    ``inputs`` may carry precomputed features aligned with ``train_set``.
    ``evaluator`` replaces the early-stop loss (used by tests to inject a
    loss sequence). Returns the weights of the best early-stop epoch.
    """
    config = config or TrainConfig()
    label = _single_label(train_set)
    if label != pattern:
        raise ValueError(f"training set is {label.value}, expected {pattern.value}")
    if inputs is None:
        inputs = featurize(train_set)
    if len(inputs) != len(train_set):
        raise ValueError("inputs must align with train_set")

    start = time.perf_counter()
    order = list(range(len(inputs)))
    random.Random(config.seed).shuffle(order)
    n_hold = min(len(order) - 1, max(1, math.floor(config.early_stop_fraction * len(order) + 0.5)))
    if n_hold < 1:
        held, fit = [inputs[i] for i in order], [inputs[i] for i in order]
    else:
        held = [inputs[i] for i in order[:n_hold]]
        fit = [inputs[i] for i in order[n_hold:]]
    if evaluator is None:
        def evaluator(m):
            return mean_reconstruction_error(m, held)

    dims = (inputs[0].features.shape[1], config.hidden_dim, config.latent_dim)
    model = init_model(encoder_kind, dims, seed=config.seed)
    model.trained_pattern = pattern
    state = AdamState.zeros_like(model.params)
    rng = np.random.default_rng(config.seed)
    report = TrainReport()
    best_loss = math.inf
    best_params = {k: v.copy() for k, v in model.params.items()}
    waited = 0
    step = 0
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(len(fit))
        batch_losses = []
        for lo in range(0, len(fit), config.batch_size):
            batch = [fit[i] for i in perm[lo:lo + config.batch_size]]
            loss, grads = batch_loss_and_gradients(model, batch)
            step += 1
            adam_step(model.params, grads, state, step, lr=config.learning_rate)
            batch_losses.append(loss)
        es_loss = float(evaluator(model))
        report.train_losses.append(float(np.mean(batch_losses)))
        report.early_stop_losses.append(es_loss)
        report.stopped_epoch = epoch
        log.debug("%s/%s epoch %d train %.5f early-stop %.5f", encoder_kind, pattern.value,
                  epoch, report.train_losses[-1], es_loss)
        if es_loss < best_loss:
            best_loss = es_loss
            report.best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
            waited = 0
        else:
            waited += 1
            if waited >= config.early_stop_patience:
                break
    model.params = best_params
    report.wall_time = time.perf_counter() - start
    model.meta = {"best_epoch": report.best_epoch, "stopped_epoch": report.stopped_epoch,
                  "train_config": asdict(config), "train_samples": len(train_set)}
    return model, report


# -- evaluation -----------------------------------------------------------------

def per_graph_errors(model: GaeModel, eval_set) -> list[float]:
    return [graph_loss(model, gi) for gi in _as_inputs(eval_set)]


def mean_reconstruction_error(model: GaeModel, eval_set) -> float:
    if len(eval_set) == 0:
        raise ValueError("evaluation set is empty")
    errors = per_graph_errors(model, eval_set)
    return math.fsum(errors) / len(errors)


@dataclass
class ErrorMatrix:
    encoder_kind: str
    labels: tuple[PatternLabel, ...]
    values: np.ndarray
    counts: np.ndarray

    @property
    def row_argmin(self) -> list[PatternLabel]:
        return [self.labels[int(j)] for j in np.argmin(self.values, axis=1)]

    def diagonal_hits(self) -> int:
        return sum(int(np.argmin(row) == i) for i, row in enumerate(self.values))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = [l.value for l in self.labels]
        w.writerow(["trained\\evaluated", *names, "row_min", "samples"])
        for i, row in enumerate(self.values):
            j_min = int(np.argmin(row))
            cells = [f"{v:.6f}" + ("*" if j == j_min else "") for j, v in enumerate(row)]
            w.writerow([names[i], *cells, "*" + names[j_min], int(self.counts[i].sum())])
        return buf.getvalue()

    def to_svg(self, cell: int = 70) -> str:
        n = len(self.labels)
        margin = 120
        lo, hi = float(self.values.min()), float(self.values.max())
        span = hi - lo or 1.0
        width = margin + n * cell + 10
        height = margin + n * cell + 30
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
                 f'font-family="sans-serif" font-size="11">',
                 f'<text x="{margin}" y="16" font-size="13">GAE-{escape(self.encoder_kind.upper())} '
                 f'reconstruction error (rows: trained, columns: evaluated)</text>']
        for j, lab in enumerate(self.labels):
            x = margin + j * cell + cell / 2
            parts.append(f'<text x="{x}" y="{margin - 8}" text-anchor="end" '
                         f'transform="rotate(-40 {x} {margin - 8})">{escape(lab.value)}</text>')
        for i, lab in enumerate(self.labels):
            y = margin + i * cell + cell / 2 + 4
            parts.append(f'<text x="{margin - 6}" y="{y}" text-anchor="end">{escape(lab.value)}</text>')
        for i, row in enumerate(self.values):
            j_min = int(np.argmin(row))
            for j, v in enumerate(row):
                shade = int(255 - 200 * (float(v) - lo) / span)
                x, y = margin + j * cell, margin + i * cell
                stroke = ' stroke="#1a9e3a" stroke-width="4"' if j == j_min else ' stroke="#ffffff"'
                parts.append(f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" '
                             f'fill="rgb({shade},{shade},255)"{stroke}/>')
                parts.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" '
                             f'text-anchor="middle">{v:.3f}</text>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def _cell_error(args):
    model, inputs = args
    return mean_reconstruction_error(model, inputs)


def error_matrix(models: Mapping[PatternLabel, GaeModel],
                 validation_sets: Mapping[PatternLabel, Sequence],
                 labels: Sequence[PatternLabel] = PATTERNS, threads: int = 1) -> ErrorMatrix:
    missing_m = [l.value for l in labels if l not in models]
    missing_v = [l.value for l in labels if l not in validation_sets]
    if missing_m or missing_v:
        raise ValueError(f"missing models for {missing_m}, validation sets for {missing_v}")
    kinds = {models[l].encoder_kind for l in labels}
    if len(kinds) != 1:
        raise ValueError(f"models mix encoder kinds {sorted(kinds)}")
    inputs = {l: _as_inputs(validation_sets[l]) for l in labels}
    jobs = [(models[r], inputs[c]) for r in labels for c in labels]
    if threads > 1:
        with get_context("fork").Pool(threads) as pool:
            flat = pool.map(_cell_error, jobs)
    else:
        flat = [_cell_error(j) for j in jobs]
    k = len(labels)
    counts = np.array([[len(inputs[c]) for c in labels] for _ in labels])
    return ErrorMatrix(kinds.pop(), tuple(labels), np.array(flat).reshape(k, k), counts)


# -- thresholds and classification ---------------------------------------------------

def nearest_rank(values: Sequence[float], percentile: float) -> float:
    if not values:
        raise ValueError("no values")
    if not 0.0 <= percentile <= 100.0:
        raise ValueError("percentile must be in [0, 100]")
    ordered = sorted(values)
    rank = max(1, math.ceil(percentile / 100.0 * len(ordered)))
    return ordered[rank - 1]


def calibrate_threshold(model: GaeModel, train_set, percentile: float = 95.0) -> float:
    if len(train_set) == 0:
        raise ValueError("calibration set is empty")
    labels = {s.label for s in train_set if isinstance(s, LabeledGraph)}
    if model.trained_pattern is not None and labels - {model.trained_pattern}:
        raise ValueError("calibration set does not match the model's pattern")
    model.threshold = float(nearest_rank(per_graph_errors(model, train_set), percentile))
    return model.threshold


@dataclass
class Classification:
    scores: dict[PatternLabel, float]
    argmin_label: PatternLabel
    flags: dict[PatternLabel, bool]

    @property
    def best_score(self) -> float:
        return self.scores[self.argmin_label]


class UncalibratedModelError(ValueError):
    pass


def check_model_set(models: Mapping[PatternLabel, GaeModel]) -> None:
    missing = [l.value for l in PATTERNS if l not in models]
    if missing:
        raise ValueError(f"missing models for patterns: {', '.join(missing)}")
    kinds = {m.encoder_kind for m in models.values()}
    if len(kinds) != 1:
        raise ValueError(f"models mix encoder kinds {sorted(kinds)}")
    uncal = [l.value for l, m in models.items() if m.threshold is None]
    if uncal:
        raise UncalibratedModelError(
            f"models without threshold: {', '.join(uncal)}; run `motifgae train` to calibrate")


def classify(graph: DiGraph | LabeledGraph | GraphInput,
             models: Mapping[PatternLabel, GaeModel]) -> Classification:
    check_model_set(models)
    (gi,) = _as_inputs([graph])
    scores = {l: graph_loss(models[l], gi) for l in PATTERNS}
    best = min(PATTERNS, key=lambda l: scores[l])
    flags = {l: scores[l] <= models[l].threshold for l in PATTERNS}
    return Classification(scores, best, flags)
