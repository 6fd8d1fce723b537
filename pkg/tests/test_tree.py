import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outembed.instances import random_tree
from outembed.metric import DistanceMatrix, all_quads_ok, linf_gap, restrict_labels
from outembed.tree import (WeightedTree, induced_metric, leaf_augment, parse_newick, remove_labels,
                           to_newick)


def star():
    return WeightedTree.from_edges([("c", "a", 1.0), ("c", "b", 1.0), ("c", "d", 1.0)], steiner=["c"])


def test_single_and_edge():
    T = WeightedTree.single("a")
    assert T.labels == ["a"] and len(T) == 1
    T = WeightedTree.from_edges([("a", "b", 1.5)])
    assert induced_metric(T)[0, 1] == 1.5
    assert to_newick(T) == "(b:1.5)a;"


def test_unit_star_metric_and_newick():
    T = star()
    M = induced_metric(T)
    assert set(M.dist) == {2.0}
    assert to_newick(T) == "((b:1,d:1):1)a;"


def test_zero_edges_contract():
    T = WeightedTree.from_edges([("s", "a", 0.0), ("s", "b", 1.0), ("s", "c", 2.0)], steiner=["s"])
    assert len(T) == 3
    assert induced_metric(T).square()[1, 2] == 3.0


def test_from_edges_rejects_cycles():
    with pytest.raises(ValueError):
        WeightedTree.from_edges([("a", "b", 1), ("b", "c", 1), ("c", "a", 1)])


def test_leaf_augment_interior_stem():
    T = WeightedTree.from_edges([("u", "v", 3.0)])
    T2, loc = leaf_augment(T, "a", "u", "v", 2.0, 3.0, 3.0)
    assert loc.kind == "edge" and loc.offset == pytest.approx(1.0)
    M = induced_metric(T2)
    assert M[M.index("a"), M.index("u")] == pytest.approx(2.0)
    assert M[M.index("a"), M.index("v")] == pytest.approx(3.0)
    assert T.labels == ["u", "v"]  # input untouched


def test_leaf_augment_at_vertex_and_zero_pendant():
    T = WeightedTree.from_edges([("u", "m", 1.0), ("m", "v", 1.0)], steiner=["m"])
    T2, loc = leaf_augment(T, "a", "u", "v", 1.0, 1.0, 2.0)
    assert loc.kind == "vertex"
    assert T2.label_of(loc.vertex) == "a"  # labels the Steiner stem
    T3, _ = leaf_augment(T2, "b", "u", "a", 1.5, 0.5, 1.0)
    T3.check()


def test_leaf_augment_rejects_bad_distances():
    T = WeightedTree.from_edges([("u", "v", 3.0)])
    with pytest.raises(ValueError):
        leaf_augment(T, "a", "u", "v", 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        leaf_augment(T, "u", "u", "v", 1.0, 2.0, 3.0)


def test_remove_labels_cleanup():
    T = remove_labels(star(), ["d"])
    assert len(T) == 2 and T.edges()[0][2] == 2.0
    path = WeightedTree.from_edges([("a", "b", 1.0), ("b", "c", 1.0)])
    T = remove_labels(path, ["b"])
    assert T.labels == ["a", "c"] and T.edges()[0][2] == 2.0
    one = remove_labels(star(), ["a", "b"])
    assert one.labels == ["d"] and len(one) == 1
    with pytest.raises(ValueError):
        remove_labels(star(), ["a", "b", "d"])


def test_internal_label_becomes_steiner():
    T = WeightedTree.from_edges([("h", "a", 1.0), ("h", "b", 1.0), ("h", "c", 1.0)])
    T2 = remove_labels(T, ["h"])
    assert T2.labels == ["a", "b", "c"] and len(T2) == 4
    assert linf_gap(induced_metric(T2), restrict_labels(induced_metric(T), "abc")) == 0


def test_newick_quoting_and_parse_errors():
    T = WeightedTree.from_edges([("a b", "c:d", 1.0)])
    s = to_newick(T)
    assert "'a b'" in s and "'c:d'" in s
    assert linf_gap(induced_metric(parse_newick(s)), induced_metric(T)) == 0
    with pytest.raises(ValueError):
        parse_newick("(a,b)c;")
    with pytest.raises(ValueError):
        parse_newick("(a:1")


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.integers(0, 10 ** 6))
def test_newick_round_trip(n, seed):
    """Parsing the Newick text reproduces the induced metric (labels come
    back as strings)."""
    T = random_tree(n, np.random.default_rng(seed))
    T2 = parse_newick(to_newick(T))
    assert sorted(T2.labels) == sorted(str(lab) for lab in T.labels)
    if n > 1:
        M = induced_metric(T)
        M = DistanceMatrix(M.dist, [str(lab) for lab in M.labels])
        assert linf_gap(M, induced_metric(T2)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 30), st.integers(0, 10 ** 6))
def test_augment_and_remove_preserve_distances(n, seed):
    """Augmentation keeps old distances; removal keeps survivors' distances;
    the result stays a tree metric with Steiner vertices of degree >= 3."""
    rng = np.random.default_rng(seed)
    T = random_tree(n, rng)
    before = induced_metric(T)
    labels = T.labels
    u, v = rng.choice(len(labels), 2, replace=False)
    u, v = labels[u], labels[v]
    duv = T.distance(T.vertex_of(u), T.vertex_of(v))
    r, l = float(rng.uniform(0.1, 2)), float(rng.uniform(0, duv))
    T2, _ = leaf_augment(T, "new", u, v, l + r, duv - l + r, duv)
    T2.check()
    after = induced_metric(T2)
    assert linf_gap(restrict_labels(after, labels), before) < 1e-9
    assert all_quads_ok(after) if n <= 12 else True
    drop = [labels[i] for i in rng.choice(len(labels), n // 2, replace=False)]
    T3 = remove_labels(T2, drop)
    T3.check()
    keep = [lab for lab in T2.labels if lab not in drop]
    assert linf_gap(induced_metric(T3), restrict_labels(after, keep)) < 1e-9
    assert all(T3.degree(v) >= 3 for v in T3.vertices() if T3.label_of(v) is None)
    assert len(T3) <= max(1, 2 * len(T3.labels) - 2)


def test_induced_metric_of_random_tree_is_tree_metric():
    T = random_tree(200, np.random.default_rng(7))
    M = induced_metric(T)
    rng = np.random.default_rng(1)
    D = M.square()
    for _ in range(2000):
        i, j, k, l = rng.choice(200, 4, replace=False)
        s = sorted((D[i, j] + D[k, l], D[i, k] + D[j, l], D[i, l] + D[j, k]))
        assert s[2] - s[1] < 1e-9
