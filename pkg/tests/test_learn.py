import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spfkit.graph import Leaf, Product, SpfError, Sum, VariableTable, build_graph, graph_to_json, is_decomposable
from spfkit.learn import (
    Dataset, LearnConfig, cluster_instances, estimate_leaf, learn_spf, load_dataset_csv, spearman,
    variable_partition,
)
from spfkit.summation import LeafOptions, sum_leaf
from spfkit.bench import BOX, generate_dataset


def ranks(a):
    """Average ranks, computed by sorting and grouping ties."""
    a = np.asarray(a, dtype=float)
    order = sorted(range(len(a)), key=lambda i: a[i])
    r = np.empty(len(a))
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and a[order[j + 1]] == a[order[i]]:
            j += 1
        for k in range(i, j + 1):
            r[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return r


def paired_points(rng, m=300, blocks=2, noise=0.1):
    cols = []
    for _ in range(blocks):
        s = rng.uniform(-1, 1, m)
        cols += [s + rng.normal(0, noise, m), s + rng.normal(0, noise, m)]
    return np.column_stack(cols)


# --- spearman ---------------------------------------------------------------------

@pytest.mark.parametrize("a,b,want", [
    ((1, 2, 3), (10, 20, 30), 1.0),
    ((1, 2, 3), (3, 2, 1), -1.0),
    ((1, 2, 3, 4), (2, 1, 4, 3), 0.6),
    ((1, 1, 1), (1, 2, 3), 0.0),
])
def test_spearman_examples(a, b, want):
    assert spearman(a, b) == pytest.approx(want)


def test_spearman_needs_three_points():
    with pytest.raises(SpfError):
        spearman([1, 2], [2, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=3, max_size=30))
def test_spearman_is_pearson_of_average_ranks(pairs):
    a, b = map(np.array, zip(*pairs))
    ra, rb = ranks(a), ranks(b)
    if np.ptp(ra) == 0 or np.ptp(rb) == 0:
        want = 0.0
    else:
        want = float(np.corrcoef(ra, rb)[0, 1])
    assert spearman(a, b) == pytest.approx(want, abs=1e-12)


# --- variable partition ---------------------------------------------------------

def test_two_independent_pairs_are_separated():
    pts = paired_points(np.random.default_rng(0))
    assert variable_partition(pts, 0.3) == [[0, 1], [2, 3]]


def test_zero_threshold_gives_one_component():
    pts = np.random.default_rng(1).uniform(size=(50, 5))
    assert variable_partition(pts, 0.0) == [[0, 1, 2, 3, 4]]


def test_high_threshold_on_noise_gives_singletons():
    pts = np.random.default_rng(2).uniform(size=(300, 5))
    assert variable_partition(pts, 0.95) == [[i] for i in range(5)]


# --- clustering -------------------------------------------------------------------

def test_separated_blobs_are_recovered():
    rng = np.random.default_rng(3)
    a = rng.normal(0, 1, (40, 3))
    b = rng.normal(6, 1, (60, 3))
    groups = cluster_instances(np.vstack([a, b]), 2, seed=0)
    got = sorted(tuple(g) for g in groups)
    assert got == [tuple(range(40)), tuple(range(40, 100))]


def test_as_many_clusters_as_instances():
    pts = np.arange(5.0)[:, None]
    groups = cluster_instances(pts, 5, seed=0)
    assert sorted(len(g) for g in groups) == [1] * 5


def test_identical_instances_still_fill_every_cluster():
    groups = cluster_instances(np.zeros((6, 2)), 2, seed=0)
    assert all(len(g) > 0 for g in groups)
    assert sorted(np.concatenate(groups)) == list(range(6))


def test_too_few_instances():
    with pytest.raises(SpfError):
        cluster_instances(np.zeros((1, 2)), 2)


def test_clustering_is_deterministic_given_seed():
    pts = np.random.default_rng(4).normal(size=(80, 3))
    a = cluster_instances(pts, 3, seed=9)
    b = cluster_instances(pts, 3, seed=9)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


# --- leaves -------------------------------------------------------------------------

def finite_data(rng, m=100, sizes=(2, 3, 2), label=None):
    vars = VariableTable.finite(list(sizes))
    pts = np.column_stack([rng.integers(0, d, m) for d in sizes])
    labels = np.full(m, 2.5) if label is None else label(pts)
    return Dataset(vars, pts, labels=labels)


def test_table_average_of_constant_labels():
    data = finite_data(np.random.default_rng(5), m=200)
    leaf = estimate_leaf(data, np.arange(len(data)), (0, 1), "table-average")
    assert leaf.table == (2.5,) * 6


def test_table_average_empty_cell_is_zero():
    vars = VariableTable.finite([3])
    data = Dataset(vars, np.array([[0], [0], [1]]), labels=np.array([1.0, 3.0, 5.0]))
    leaf = estimate_leaf(data, np.arange(3), (0,), "table-average")
    assert leaf.table == (2.0, 5.0, 0.0)


def test_unknown_estimator():
    with pytest.raises(SpfError):
        estimate_leaf(finite_data(np.random.default_rng(0)), np.arange(3), (0,), "median")
    with pytest.raises(ValueError):
        LearnConfig(leaf_estimator="median")


def restriction_minimum(data, idx, scope):
    leaf = estimate_leaf(data, idx, scope, "oracle-restriction")
    g = build_graph("min-sum", data.vars, [leaf], 0)
    # diagonal basins at (pi, pi) trap a fair share of random starts
    value, _ = sum_leaf(g, leaf, options=LeafOptions(restarts=64))
    return value


def test_oracle_leaf_on_true_pair_has_zero_minimum():
    insts, data = generate_dataset(1, 4, np.random.default_rng(6))
    i, j = insts[0].pairs[0]
    assert restriction_minimum(data, np.array([0]), (i, j)) == pytest.approx(0.0, abs=1e-6)


def test_oracle_leaf_on_wrong_pair_is_penalised():
    insts, data = generate_dataset(1, 4, np.random.default_rng(7))
    a, b = insts[0].pairs
    wrong = (a[0], b[0])
    assert restriction_minimum(data, np.array([0]), wrong) > 1e-3


# --- structure learning ------------------------------------------------------------

def test_few_variables_give_a_single_leaf():
    data = finite_data(np.random.default_rng(8), sizes=(2, 2))
    g = learn_spf(data, LearnConfig(v=2))
    assert isinstance(g.nodes[g.root], Leaf)


def test_independent_pairs_give_a_product_of_two_leaves():
    pts = paired_points(np.random.default_rng(9))
    data = Dataset(VariableTable.intervals([BOX] * 4), pts)
    g = learn_spf(data, LearnConfig(leaf_estimator="cluster-mean-quadratic"))
    root = g.nodes[g.root]
    assert isinstance(root, Product)
    assert sorted(g.nodes[c].scope for c in root.children) == [(0, 1), (2, 3)]


def two_patterns(rng, m=300):
    """Half the instances pair (0,1),(2,3) near +3; the rest pair (0,2),(1,3) near -3."""
    pts = np.empty((m, 4))
    truth = []
    for i in range(m):
        if i % 2 == 0:
            pairs, c = [(0, 1), (2, 3)], 3.0
        else:
            pairs, c = [(0, 2), (1, 3)], -3.0
        for a, b in pairs:
            s = c + rng.uniform(-1, 1)
            pts[i, a], pts[i, b] = s + rng.normal(0, 0.1), s + rng.normal(0, 0.1)
        truth.append(frozenset(frozenset(p) for p in pairs))
    return pts, truth


def test_mixed_patterns_give_a_sum_of_products():
    pts, truth = two_patterns(np.random.default_rng(10))
    data = Dataset(VariableTable.intervals([(-5.12, 5.12)] * 4), pts)
    res = learn_spf(data, LearnConfig(leaf_estimator="cluster-mean-quadratic"), return_result=True)
    root = res.graph.nodes[res.graph.root]
    assert isinstance(root, Sum) and len(root.children) == 2
    assert all(isinstance(res.graph.nodes[c], Product) for c in root.children)
    assert res.structure_recovery(truth) == 1.0


def test_block_diagonal_recovery():
    rng = np.random.default_rng(11)
    pts = paired_points(rng, m=300, blocks=4)
    truth = frozenset(frozenset({2 * b, 2 * b + 1}) for b in range(4))
    data = Dataset(VariableTable.intervals([BOX] * 8), pts)
    res = learn_spf(data, LearnConfig(leaf_estimator="cluster-mean-quadratic"), return_result=True)
    assert res.structure_recovery([truth] * len(pts)) >= 0.9


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.sampled_from([4, 8]), k=st.integers(2, 4))
def test_learned_graphs_are_decomposable_and_reproducible(seed, n, k):
    rng = np.random.default_rng(seed)
    _, data = generate_dataset(80, n, rng)
    cfg = LearnConfig(t=10, k=k, seed=seed, leaf_estimator="cluster-mean-quadratic")
    a = learn_spf(data, cfg)
    b = learn_spf(data, cfg)
    assert is_decomposable(a)
    assert json.dumps(graph_to_json(a)) == json.dumps(graph_to_json(b))


def test_learn_config_validation():
    for bad in (dict(t=0), dict(v=0), dict(k=1), dict(rho_min=1.0)):
        with pytest.raises(ValueError):
            LearnConfig(**bad)


# --- CSV -----------------------------------------------------------------------------

def test_value_labelled_csv():
    data = load_dataset_csv("A,B,y\n0,1,2.0\n1,2,3.5\n0,0,1.0\n")
    assert [v.name for v in data.vars] == ["A", "B"]
    assert [v.domain.size for v in data.vars] == [2, 3]
    assert list(data.labels) == [2.0, 3.5, 1.0]


def test_structured_csv():
    data = load_dataset_csv("x_a,y_2,y_1\n0.5,1.0,2.0\n0.1,-1.0,0.0\n", domain=(-5, 5))
    assert [v.name for v in data.vars] == ["y_1", "y_2"]
    assert data.points.tolist() == [[2.0, 1.0], [0.0, -1.0]]
    assert data.params.tolist() == [[0.5], [0.1]]


@pytest.mark.parametrize("text", ["", "A,B\n1,2\n", "A,y\n", "A,y\n0.5,1\n", "A,y\nq,1\n", "A,y,y_1\n0,1,2\n"])
def test_bad_csv(text):
    with pytest.raises(SpfError):
        load_dataset_csv(text)
