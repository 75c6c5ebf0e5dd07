import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from motifgae import features as F
from motifgae.generators import GENERATORS, GeneratorParams
from motifgae.graph import PATTERNS, DiGraph

from motifs import to_nx
from oracles import outgoing_closeness, outgoing_harmonic, walk_return_time_std

PATH = DiGraph(3, ((0, 1), (1, 2)))
TRIANGLE = DiGraph(3, ((0, 1), (1, 2), (2, 0)))
K3 = DiGraph(3, ((0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)))
TWO_CYCLE = DiGraph(2, ((0, 1), (1, 0)))
STAR_IN = DiGraph(5, ((1, 0), (2, 0), (3, 0), (4, 0)))
STAR_OUT = DiGraph(4, ((0, 1), (0, 2), (0, 3)))
ISOLATED = DiGraph(1)


def digraphs(max_nodes=9):
    return st.integers(1, max_nodes).flatmap(lambda n: st.builds(
        lambda e: DiGraph.from_edges(n, [(u, v) for u, v in e if u != v]),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n)))


def test_closeness_examples():
    assert F.closeness(PATH)[2] == pytest.approx(2 / 3, abs=1e-9)
    assert F.closeness(ISOLATED)[0] == 0
    assert F.closeness(STAR_IN)[0] == pytest.approx(1.0, abs=1e-9)


def test_betweenness_examples():
    assert F.betweenness(PATH)[1] == pytest.approx(0.5, abs=1e-9)
    assert F.betweenness(TRIANGLE) == pytest.approx([0.5] * 3, abs=1e-9)
    assert F.betweenness(STAR_OUT)[1:] == pytest.approx([0, 0, 0], abs=1e-9)


def test_harmonic_examples():
    assert F.harmonic(PATH)[2] == pytest.approx(1.5, abs=1e-9)
    assert F.harmonic(ISOLATED)[0] == 0
    assert F.harmonic(TWO_CYCLE) == pytest.approx([1, 1], abs=1e-9)


def test_second_order_examples():
    assert F.second_order(K3) == pytest.approx([math.sqrt(2)] * 3, abs=1e-9)
    assert F.second_order(PATH)[1] == pytest.approx(0.0, abs=1e-9)
    assert F.second_order(ISOLATED)[0] == 0


def test_return_time_mean_is_kac():
    # Kac: expected return time = 2|E| / deg(v).
    g = nx.gnp_random_graph(7, 0.6, seed=3)
    assert nx.is_connected(g)
    adj = nx.to_numpy_array(g)
    for v in g.nodes:
        mean, _ = F.return_time_moments(adj, v)
        assert mean == pytest.approx(2 * g.number_of_edges() / g.degree(v), rel=1e-10)


def _random_connected(n, seed):
    rng = np.random.default_rng(seed)
    while True:
        g = nx.gnp_random_graph(n, 0.4, seed=int(rng.integers(1 << 30)))
        if nx.is_connected(g):
            return g


@pytest.mark.slow
@pytest.mark.parametrize("name", ["K3", "C4", "random8"])
def test_second_order_monte_carlo(name):
    g = {"K3": nx.complete_graph(3), "C4": nx.cycle_graph(4), "random8": _random_connected(8, 11)}[name]
    dg = DiGraph.from_edges(g.number_of_nodes(), list(g.edges))
    exact = F.second_order(dg)
    est = walk_return_time_std([sorted(g.neighbors(v)) for v in range(len(g))], 10**6, seed=5)
    nonzero = exact > 0
    assert np.all(np.abs(est[nonzero] - exact[nonzero]) / exact[nonzero] < 0.02)
    assert np.all(est[~nonzero] < 1e-9)


def test_laplacian_examples():
    star = DiGraph(4, ((0, 1), (0, 2), (0, 3)))
    lc = F.laplacian_centrality(star)
    assert lc[0] == pytest.approx(1.0, abs=1e-9)
    assert lc[1:] == pytest.approx([4 / 9] * 3, abs=1e-9)
    assert F.laplacian_centrality(DiGraph(3)).tolist() == [0, 0, 0]


def test_constraint_examples():
    assert F.burt_constraint(DiGraph(2, ((0, 1),))) == pytest.approx([1, 1], abs=1e-9)
    assert F.burt_constraint(K3) == pytest.approx([1.125] * 3, abs=1e-9)
    assert F.burt_constraint(ISOLATED)[0] == 0


def test_reciprocity_examples():
    assert F.node_reciprocity(TWO_CYCLE).tolist() == [1, 1]
    assert F.node_reciprocity(STAR_IN).tolist() == [0] * 5
    assert F.node_reciprocity(DiGraph(3, ((0, 1), (1, 0), (1, 2))))[1] == pytest.approx(2 / 3)


@settings(max_examples=60, deadline=None)
@given(digraphs())
def test_against_networkx(g):
    h = to_nx(g)
    n = g.node_count
    nodes = range(n)
    np.testing.assert_allclose(F.closeness(g), [nx.closeness_centrality(h)[v] for v in nodes], atol=1e-9)
    np.testing.assert_allclose(F.betweenness(g), [nx.betweenness_centrality(h)[v] for v in nodes], atol=1e-9)
    np.testing.assert_allclose(F.harmonic(g), [nx.harmonic_centrality(h)[v] for v in nodes], atol=1e-9)
    # nx.constraint returns nan for nodes without successors; sum local terms instead.
    con = [sum(nx.local_constraint(h, v, w) for w in set(nx.all_neighbors(h, v))) for v in nodes]
    np.testing.assert_allclose(F.burt_constraint(g), con, atol=1e-9)
    rec = nx.reciprocity(h, nodes) if h.number_of_edges() else {}
    np.testing.assert_allclose(F.node_reciprocity(g), [rec.get(v) or 0.0 for v in nodes], atol=1e-9)
    u = h.to_undirected()
    if u.number_of_edges():
        lc = nx.laplacian_centrality(u, normalized=True)
        np.testing.assert_allclose(F.laplacian_centrality(g), [lc[v] for v in nodes], atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(digraphs(), st.randoms(use_true_random=False))
def test_permutation_equivariance(g, rnd):
    perm = list(range(g.node_count))
    rnd.shuffle(perm)
    a = F.raw_features(g)
    b = F.raw_features(g.relabeled(perm))
    np.testing.assert_allclose(b[perm], a, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(digraphs())
def test_transpose_duality(g):
    rev = g.reversed()
    np.testing.assert_allclose(F.closeness(rev), outgoing_closeness(g.node_count, g.edges), atol=1e-12)
    np.testing.assert_allclose(F.harmonic(rev), outgoing_harmonic(g.node_count, g.edges), atol=1e-12)
    np.testing.assert_allclose(F.betweenness(rev), F.betweenness(g), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(digraphs())
def test_laplacian_range_and_overlap(g):
    lc = F.laplacian_centrality(g)
    assert np.all(lc >= -1e-12) and np.all(lc <= 1 + 1e-12)
    if g.edge_count:
        assert lc.sum() >= 1 - 1e-12


def test_collector_center_row():
    fm = F.compute_features(STAR_IN)
    assert fm.column_order == F.COLUMNS
    row = fm.values[0]
    for col, want in (("in_degree", 1), ("out_degree", 0), ("closeness", 1), ("reciprocity", 0)):
        assert row[F.COLUMNS.index(col)] == pytest.approx(want, abs=1e-12)


def test_single_node_features():
    fm = F.compute_features(ISOLATED)
    assert fm.values.tolist() == [[0.0] * 9]
    with pytest.raises(ValueError):
        F.compute_features(DiGraph(0))


def test_normalization_metadata():
    fm = F.compute_features(PATH)
    np.testing.assert_allclose(fm.col_min, fm.raw.min(axis=0))
    np.testing.assert_allclose(fm.col_max, fm.raw.max(axis=0))


@pytest.mark.parametrize("label", PATTERNS, ids=lambda l: l.value)
def test_generator_sweep_finite(label):
    gen = GENERATORS[label]
    params = GeneratorParams()
    for seed in range(300):
        v = F.compute_features(gen(params, seed).graph).values
        assert np.all(np.isfinite(v)) and v.min() >= 0 and v.max() <= 1


def test_feature_dump(tmp_path):
    import io, json
    buf = io.StringIO()
    assert F.dump_features([("p", F.compute_features(PATH))], buf) == 1
    rec = json.loads(buf.getvalue())
    assert rec["graph_id"] == "p" and len(rec["rows"]) == 3 and len(rec["rows"][0]) == 9
