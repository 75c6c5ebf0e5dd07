"""Exit criteria. Each test records one PASS/FAIL line shown in the terminal summary.

The desk-scale training fixture (7 GCN models, 1,500 graphs per pattern)
takes a few minutes on one core.
"""

import math
import time

import numpy as np
import pytest

from conftest import quiet, record_criterion
from motifgae import features as F
from motifgae import nn
from motifgae import training as T
from motifgae.cli import main
from motifgae.generators import GENERATORS, GeneratorParams, generate_dataset
from motifgae.graph import PATTERNS, DiGraph, PatternLabel
from motifgae.ingest import export_transactions
from motifgae.nn import save_model

from motifs import check_sample
from oracles import walk_return_time_std
from test_nn import numeric_gradients, random_digraph

pytestmark = pytest.mark.slow

N_SEEDS = 10_000
DESK_TRAIN, DESK_VAL, DESK_TEST = 1500, 300, 100


def within_3sigma(hits, n, p):
    return abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


# 1 -------------------------------------------------------------------------

def _noise_events(label, infos, params):
    """(name, hits, trials, configured probability) for every Bernoulli event of a pattern."""
    if label is PatternLabel.COLLECTOR:
        return [("noise", sum(i["noise"] for i in infos), len(infos), params.collector.noise_prob)]
    if label is PatternLabel.SINK:
        return [("noise", sum(i["noise"] for i in infos), len(infos), params.sink.noise_prob)]
    if label is PatternLabel.COLLUSION:
        p = params.collusion
        return [("two_inputs", sum(i["n_i"] == 2 for i in infos), len(infos), p.two_input_prob),
                ("noise_in", sum(i["noise_in"] for i in infos), len(infos), p.noise_prob),
                ("noise_out", sum(i["noise_out"] for i in infos), len(infos), p.noise_prob)]
    if label is PatternLabel.SCATTER_GATHER:
        trials = sum(i["n_m"] for i in infos)
        return [("noise_in", sum(i["noise_in"] for i in infos), trials, params.sg.noise_prob),
                ("noise_out", sum(i["noise_out"] for i in infos), trials, params.sg.noise_prob)]
    if label is PatternLabel.GATHER_SCATTER:
        return [("sender_noise", sum(i["noise_s"] for i in infos), sum(i["n_i"] for i in infos),
                 params.gs.noise_prob),
                ("receiver_noise", sum(i["noise_r"] for i in infos), sum(i["n_o"] for i in infos),
                 params.gs.noise_prob)]
    if label is PatternLabel.CYCLIC:
        trials = sum(i["length"] for i in infos)
        return [("noise_in", sum(len(i["noise_in"]) for i in infos), trials, params.cyclic.noise_prob),
                ("noise_out", sum(len(i["noise_out"]) for i in infos), trials, params.cyclic.noise_prob)]
    kids = [c for i in infos for c in i["children"]]
    b = params.branching
    return [("three_children", kids.count(3), len(kids), b.p3),
            ("zero_children", kids.count(0), len(kids), b.p0 - b.p3),
            ("two_children", kids.count(2), len(kids), 1 - b.p0)]


def test_criterion_1_generator_conformance():
    params = GeneratorParams()
    silent = quiet(params)
    start = time.perf_counter()
    failures = []
    for label in PATTERNS:
        gen = GENERATORS[label]
        infos = []
        for seed in range(N_SEEDS):
            infos.append(check_sample(gen(params, seed), params))
            check_sample(gen(silent, seed), silent, noisy=False)
        for name, hits, n, p in _noise_events(label, infos, params):
            if not within_3sigma(hits, n, p):
                failures.append(f"{label.value}.{name}={hits / n:.4f} (p={p})")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120
    record_criterion(1, "generator conformance", ok,
                     f"7x{N_SEEDS} samples, {elapsed:.1f}s, frequency misses: {failures or 'none'}")
    assert not failures
    assert elapsed < 120


# 2 -------------------------------------------------------------------------

def test_criterion_2_centrality_oracles():
    path = DiGraph(3, ((0, 1), (1, 2)))
    tri = DiGraph(3, ((0, 1), (1, 2), (2, 0)))
    k3 = DiGraph(3, ((0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)))
    two_cycle = DiGraph(2, ((0, 1), (1, 0)))
    star_in = DiGraph(5, ((1, 0), (2, 0), (3, 0), (4, 0)))
    star_k13 = DiGraph(4, ((0, 1), (0, 2), (0, 3)))
    iso = DiGraph(1)
    fixtures = [
        (F.closeness(path)[2], 2 / 3), (F.closeness(iso)[0], 0.0), (F.closeness(star_in)[0], 1.0),
        (F.betweenness(path)[1], 0.5), *((v, 0.5) for v in F.betweenness(tri)),
        *((v, 0.0) for v in F.betweenness(star_k13)[1:]),
        (F.harmonic(path)[2], 1.5), (F.harmonic(iso)[0], 0.0), *((v, 1.0) for v in F.harmonic(two_cycle)),
        *((v, math.sqrt(2)) for v in F.second_order(k3)), (F.second_order(path)[1], 0.0),
        (F.second_order(iso)[0], 0.0),
        (F.laplacian_centrality(star_k13)[0], 1.0), (F.laplacian_centrality(star_k13)[1], 4 / 9),
        *((v, 0.0) for v in F.laplacian_centrality(DiGraph(3))),
        *((v, 1.0) for v in F.burt_constraint(DiGraph(2, ((0, 1),)))),
        *((v, 1.125) for v in F.burt_constraint(k3)), (F.burt_constraint(iso)[0], 0.0),
        *((v, 1.0) for v in F.node_reciprocity(two_cycle)),
        *((v, 0.0) for v in F.node_reciprocity(star_in)),
        (F.node_reciprocity(DiGraph(3, ((0, 1), (1, 0), (1, 2))))[1], 2 / 3),
    ]
    worst = max(abs(got - want) for got, want in fixtures)
    est = walk_return_time_std([[1, 2], [0, 2], [0, 1]], 10**6, seed=1)
    rel = float(np.max(np.abs(est - math.sqrt(2)) / math.sqrt(2)))
    ok = worst <= 1e-9 and rel < 0.02
    record_criterion(2, "centrality oracle suite", ok,
                     f"{len(fixtures)} fixtures, max abs err {worst:.2e}; K3 Monte-Carlo rel err {rel:.4f}")
    assert worst <= 1e-9
    assert rel < 0.02


# 3 -------------------------------------------------------------------------

def test_criterion_3_gradient_integrity():
    worst = {}
    for kind in nn.ENCODERS:
        worst[kind] = 0.0
        for seed in range(10):
            gi = nn.prepare(random_digraph(8, 0.3, 100 + seed))
            model = nn.init_model(kind, seed=seed)
            _, analytic = nn.loss_and_gradients(model, gi)
            numeric = numeric_gradients(model, gi, step=1e-5)
            for k in numeric:
                err = np.linalg.norm(analytic[k] - numeric[k]) / max(np.linalg.norm(numeric[k]), 1e-12)
                worst[kind] = max(worst[kind], err)
    ok = all(v < 1e-4 for v in worst.values())
    record_criterion(3, "gradient integrity", ok,
                     ", ".join(f"{k} max rel err {v:.2e}" for k, v in worst.items()))
    assert ok


# 4 -------------------------------------------------------------------------

def test_criterion_4_training_sanity():
    data = generate_dataset(PatternLabel.COLLECTOR, 200, 0)
    inputs = T.featurize(data)
    ratios, stops = [], []
    for seed in range(3):
        _, report = T.train_model("gcn", PatternLabel.COLLECTOR, data, T.TrainConfig(seed=seed),
                                  inputs=inputs)
        ratios.append(min(report.early_stop_losses) / report.early_stop_losses[0])
        stops.append(report.stopped_epoch)
    ok = all(r < 0.5 for r in ratios) and any(s < 100 for s in stops)
    record_criterion(4, "training sanity", ok,
                     f"best/epoch-1 loss ratios {[round(r, 3) for r in ratios]}, stopped epochs {stops}")
    assert all(r < 0.5 for r in ratios)
    assert any(s < 100 for s in stops)


# 5, 6, 8: desk-scale GCN models --------------------------------------------

@pytest.fixture(scope="module")
def desk():
    start = time.perf_counter()
    models, val, timings = {}, {}, {}
    for i, label in enumerate(PATTERNS):
        train = generate_dataset(label, DESK_TRAIN, 10_000_000 * i)
        inputs = T.featurize(train)
        model, report = T.train_model("gcn", label, train, T.TrainConfig(seed=0), inputs=inputs)
        T.calibrate_threshold(model, inputs)
        models[label] = model
        timings[label] = report.stopped_epoch
        val[label] = T.featurize(generate_dataset(label, DESK_VAL, 10_000_000 * i + 5_000_000))
    return models, val, time.perf_counter() - start, timings


def test_criterion_5_error_matrix_diagonal(desk):
    models, val, train_time, stops = desk
    start = time.perf_counter()
    em = T.error_matrix(models, val)
    elapsed = train_time + time.perf_counter() - start
    hits = em.diagonal_hits()
    print(em.to_csv())
    ok = hits >= 6 and elapsed < 1800
    record_criterion(5, "desk-scale GCN error matrix", ok,
                     f"diagonal row-minimum in {hits}/7 rows, {elapsed:.0f}s, stopped epochs "
                     f"{[stops[l] for l in PATTERNS]}")
    assert hits >= 6
    assert elapsed < 1800
    assert np.all(np.isfinite(em.values)) and np.all(np.diag(em.values) > 0)


def test_criterion_6_classifier_accuracy(desk):
    models = desk[0]
    correct = total = 0
    for i, label in enumerate(PATTERNS):
        for gi in T.featurize(generate_dataset(label, DESK_TEST, 10_000_000 * i + 8_000_000)):
            correct += T.classify(gi, models).argmin_label is label
            total += 1
    acc = correct / total
    record_criterion(6, "argmin classifier accuracy", acc >= 0.8, f"{correct}/{total} = {acc:.3f}")
    assert acc >= 0.8


def test_criterion_8_end_to_end_ingest(desk, tmp_path):
    models = desk[0]
    model_dir = tmp_path / "gcn"
    model_dir.mkdir()
    for label, m in models.items():
        save_model(m, model_dir / f"{label.value}.model.json")
    ledger = tmp_path / "ledger.csv"
    samples = generate_dataset(PatternLabel.COLLECTOR, 100, 77_000_000)
    with open(ledger, "w", newline="") as fh:
        anchors = export_transactions(samples, fh)
    centers = tmp_path / "centers.txt"
    centers.write_text("\n".join(anchors) + "\n")
    out = tmp_path / "scan.csv"
    assert main(["ingest", "--models", str(model_dir), "--input", str(ledger), "--out", str(out),
                 "--centers", str(centers), "--hops", "1"]) == 0
    rows = out.read_text().strip().splitlines()[1:]
    labels = [r.split(",")[1] for r in rows]
    frac = labels.count("collector") / len(samples)
    record_criterion(8, "end-to-end ingest", frac >= 0.7,
                     f"{labels.count('collector')}/{len(samples)} scanned ego-graphs labeled collector")
    assert len(rows) == 100
    assert frac >= 0.7


# 7 -------------------------------------------------------------------------

def test_criterion_7_determinism(tmp_path):
    digests = []
    for run in ("a", "b"):
        root = tmp_path / run
        assert main(["generate", "--pattern", "all", "--count", "60", "--seed", "11",
                     "--out", str(root / "data")]) == 0
        assert main(["train", "--encoder", "all", "--pattern", "all", "--threads", "1", "--epochs", "3",
                     "--data", str(root / "data"), "--out", str(root / "models")]) == 0
        files = sorted(list((root / "data").glob("*.jsonl")) + list((root / "models").glob("*/*.model.json")))
        digests.append({p.relative_to(root).as_posix(): p.read_bytes() for p in files})
    same = digests[0] == digests[1]
    record_criterion(7, "byte-identical generate/train reruns", same,
                     f"{len(digests[0])} files compared ({sum(1 for k in digests[0] if k.endswith('.model.json'))} models)")
    assert len(digests[0]) == 14 + 21
    assert same
