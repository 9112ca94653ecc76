import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patree.core import EdgeSet
from patree.data import make_split, make_synthetic
from patree.graphs import (
    GraphRecipe,
    LabelAssignment,
    Variant,
    build_edges,
    build_graph,
    default_knn_k,
    epsilon_graph,
    fuse,
    intrinsic_graph,
    knn_graph,
    mst_edges,
    pa_tree_graph,
    pairwise_distances,
)
from patree.graphs import penalty_graph
from patree.trees import Leaf, PartitionTree, Split, TreeConfig, build_pa_tree


def tree_from_leaves(n, groups):
    node = Leaf(np.asarray(groups[-1]))
    for g in reversed(groups[:-1]):
        node = Split(None, 0.0, Leaf(np.asarray(g)), node)
    return PartitionTree(node, n, TreeConfig())


def labelled(y, train):
    return LabelAssignment(np.asarray(y), np.asarray(train))


def connected(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    return len({find(i) for i in range(n)}) == 1


# -- leaf cliques -------------------------------------------------------------


def test_single_leaf_is_clique():
    assert pa_tree_graph([tree_from_leaves(3, [[0, 1, 2]])]).as_set() == {(0, 1), (0, 2), (1, 2)}


def test_two_leaves():
    assert pa_tree_graph([tree_from_leaves(4, [[0, 1], [2, 3]])]).as_set() == {(0, 1), (2, 3)}


def test_forest_union():
    t1 = tree_from_leaves(4, [[0, 1], [2, 3]])
    t2 = tree_from_leaves(4, [[0, 2], [1, 3]])
    oracle = {(0, 1), (2, 3)} | {(0, 2), (1, 3)}
    assert pa_tree_graph([t1, t2]).as_set() == oracle


# -- label graphs -------------------------------------------------------------


def test_penalty_same_class_is_empty():
    assert len(penalty_graph(labelled([1, 1, 1, 1], [0, 1, 2]))) == 0


def test_label_graphs_small():
    lab = labelled([0, 0, 1], [0, 1, 2])
    assert penalty_graph(lab).as_set() == {(0, 2), (1, 2)}
    assert intrinsic_graph(lab).as_set() == {(0, 1)}


def test_intrinsic_one_per_class_is_empty():
    assert len(intrinsic_graph(labelled([0, 1, 2, 3], [0, 1, 2, 3]))) == 0


def test_label_graphs_use_train_only():
    lab = LabelAssignment(np.array([0, 0, 1, 1]), np.array([0, 2]), np.array([1, 3]))
    assert intrinsic_graph(lab).as_set() == set()
    assert penalty_graph(lab).as_set() == {(0, 2)}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=40))
def test_label_graph_sizes_match_enumeration(ys):
    n = len(ys)
    lab = labelled(ys, np.arange(n))
    pen = {(i, j) for i, j in itertools.combinations(range(n), 2) if ys[i] != ys[j]}
    intr = {(i, j) for i, j in itertools.combinations(range(n), 2) if ys[i] == ys[j]}
    counts = np.bincount(ys)
    assert penalty_graph(lab).as_set() == pen
    assert intrinsic_graph(lab).as_set() == intr
    assert len(pen) == (n * n - int((counts**2).sum())) // 2
    assert len(intr) == int((counts * (counts - 1)).sum()) // 2


# -- fusion -------------------------------------------------------------------


def test_fuse_degenerate_and_small():
    a_pa = EdgeSet(4, [(0, 1), (2, 3)])
    assert fuse(a_pa, EdgeSet(4), EdgeSet(4)) == a_pa
    assert fuse(EdgeSet(3, [(0, 2)]), EdgeSet(3, [(0, 1)]), EdgeSet(3, [(0, 2)])).as_set() == {(0, 1)}


@pytest.mark.parametrize("seed", range(10))
def test_fuse_matches_set_algebra(seed):
    rng = np.random.default_rng(seed)
    pairs = list(itertools.combinations(range(30), 2))

    def rand_set():
        return {p for p in pairs if rng.random() < 0.1}

    a, b, c = rand_set(), rand_set(), rand_set()
    got = fuse(EdgeSet(30, list(a)), EdgeSet(30, list(b)), EdgeSet(30, list(c)))
    assert got.as_set() == (a | b) - c


# -- build_graph --------------------------------------------------------------


def test_pa_only_small_is_clique():
    x = np.random.default_rng(0).standard_normal((15, 2))
    lab = make_split(np.zeros(15, dtype=int), (5, 0, 10))
    adj = build_graph(x, lab, GraphRecipe(Variant.PA_ONLY))
    assert adj.to_edge_set().as_set() == set(itertools.combinations(range(15), 2))


def test_full_without_labelled_pairs_equals_pa_only():
    x, y = make_synthetic("blobs", 120, seed=2)
    lab = LabelAssignment(y, np.array([5]), np.array([]), np.arange(6, 120))
    assert build_edges(x, lab, GraphRecipe(Variant.FULL)) == build_edges(x, lab, GraphRecipe(Variant.PA_ONLY))


@pytest.mark.parametrize("seed", range(3))
def test_full_recipe_pair_check(seed):
    x, y = make_synthetic("blobs", 300, seed=seed)
    lab = make_split(y, (50, 50, 200), seed)
    edges = build_graph(x, lab, GraphRecipe(Variant.FULL)).to_edge_set()
    tr = lab.train
    for a, b in itertools.combinations(tr, 2):
        if y[a] == y[b]:
            assert (a, b) in edges
        else:
            assert (a, b) not in edges


def test_recipe_variants():
    x, y = make_synthetic("two_moons", 150, seed=0)
    lab = make_split(y, (20, 20, 110), 0)
    a_pa = pa_tree_graph([build_pa_tree(x)])
    a_i, a_p = intrinsic_graph(lab), penalty_graph(lab)
    assert build_edges(x, lab, GraphRecipe("intrinsic")) == a_i
    assert build_edges(x, lab, GraphRecipe("pa_minus_penalty")) == a_pa - a_p
    assert build_edges(x, lab, GraphRecipe("pa")) == a_pa
    assert build_edges(x, lab, GraphRecipe("knn", knn_k=3)) == knn_graph(x, 3)
    assert build_edges(x, lab, GraphRecipe("epsilon")) == epsilon_graph(x)


def test_pa_only_is_union_of_small_cliques():
    x, y = make_synthetic("rings", 400, seed=0)
    lab = make_split(y, (10, 0, 0), 0)
    adj = build_graph(x, lab, GraphRecipe(Variant.PA_ONLY))
    a = adj.to_dense()
    seen = set()
    for i in range(400):
        comp = {i} | set(np.flatnonzero(a[i]).tolist())
        if i in seen:
            continue
        assert len(comp) <= 20
        for j in comp:  # every member has exactly the same closed neighbourhood
            assert {j} | set(np.flatnonzero(a[j]).tolist()) == comp
        seen |= comp


def test_rp_forest_recipe_is_seeded():
    x, y = make_synthetic("blobs", 200, seed=0)
    lab = make_split(y, (20, 0, 0), 0)
    r = GraphRecipe(Variant.PA_ONLY, TreeConfig(kind="rp"), forest_size=5)
    assert build_edges(x, lab, r, seed=3) == build_edges(x, lab, r, seed=3)
    assert build_edges(x, lab, r, seed=3) != build_edges(x, lab, r, seed=4)


def test_supervised_variant_needs_train():
    x = np.random.default_rng(0).standard_normal((10, 2))
    lab = LabelAssignment(np.zeros(10, dtype=int), np.array([], dtype=int))
    with pytest.raises(ValueError, match="train split is empty"):
        build_graph(x, lab, GraphRecipe(Variant.FULL))
    build_graph(x, lab, GraphRecipe(Variant.PA_ONLY))


def test_recipe_rejects_pa_forest():
    with pytest.raises(ValueError):
        GraphRecipe(Variant.FULL, TreeConfig(kind="pa"), forest_size=3)


# -- baselines ----------------------------------------------------------------


def brute_knn(x, k):
    n = len(x)
    out = set()
    for i in range(n):
        d = sorted((float(np.sqrt(np.sum((x[i] - x[j]) ** 2))), j) for j in range(n) if j != i)
        for _, j in d[:k]:
            out.add((min(i, j), max(i, j)))
    return out


def test_knn_collinear():
    x = np.array([[0.0], [1.0], [10.0]])
    assert knn_graph(x, 1).as_set() == {(0, 1), (1, 2)}


def test_knn_complete():
    x = np.random.default_rng(0).standard_normal((8, 2))
    assert len(knn_graph(x, 7)) == 28


@pytest.mark.parametrize("n,k", [(100, 4), (57, 1), (200, default_knn_k(200))])
def test_knn_matches_brute_force(n, k):
    x = np.random.default_rng(n).standard_normal((n, 3))
    e = knn_graph(x, k)
    assert e.as_set() == brute_knn(x, k)
    deg = np.bincount(e.pairs.ravel(), minlength=n)
    assert deg.min() >= k


def test_default_k_is_rounded_natural_log():
    assert default_knn_k(200) == round(math.log(200)) == 5
    assert default_knn_k(2) == 1


def test_epsilon_two_points():
    assert epsilon_graph(np.array([[0.0, 0.0], [3.0, 4.0]])).as_set() == {(0, 1)}


def test_epsilon_hand_mst():
    x = np.array([[0.0], [1.0], [3.0]])
    pairs, lengths = mst_edges(pairwise_distances(x))
    assert sorted(lengths.tolist()) == [1.0, 2.0]
    assert epsilon_graph(x).as_set() == {(0, 1), (1, 2)}


def brute_mst_weight(d):
    # Kruskal over all pairs, independent of the Prim implementation
    n = len(d)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    total, longest = 0.0, 0.0
    for w, i, j in sorted((d[i, j], i, j) for i in range(n) for j in range(i + 1, n)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            total += w
            longest = max(longest, w)
    return total, longest


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.integers(1, 4), st.integers(0, 10_000))
def test_epsilon_default_contains_mst_and_is_connected(n, d, seed):
    x = np.random.default_rng(seed).standard_normal((n, d))
    dist = pairwise_distances(x)
    pairs, lengths = mst_edges(dist)
    total, longest = brute_mst_weight(dist)
    assert lengths.sum() == pytest.approx(total)
    assert lengths.max() == longest
    e = epsilon_graph(x)
    for i, j in pairs:
        assert (int(i), int(j)) in e
    assert connected(n, e)
