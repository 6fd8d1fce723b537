import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outembed.instances import SimpleGraph, random_tree, vc_tree_instance
from outembed.metric import DistanceMatrix, all_quads_ok, four_point_ok, linf_gap, restrict_labels
from outembed.oracle import exact_min_outliers, verify_certificate
from outembed.tree import WeightedTree, induced_metric
from outembed.treefit import (DOWN, NONE, UP, compute_x_orientation, extend_or_violate,
                              outliers_tree_fast, outliers_tree_quartic)


def sq(D, labels=None):
    return DistanceMatrix.from_square(np.array(D, dtype=float), labels)


def path_case():
    T = WeightedTree.from_edges([("v1", "v2", 1.0), ("v2", "v3", 1.0)])
    D = [[0, 1, 2, 3], [1, 0, 1, 2], [2, 1, 0, 1], [3, 2, 1, 0]]
    return T, sq(D, ["v1", "v2", "v3", "x"])


def cut_square():
    return sq([[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]], list("abcd"))


def test_orientation_on_path():
    """Both edges point towards v3, which is a sink generated by v1."""
    T, M = path_case()
    st = compute_x_orientation(T, M, "x", "v3")
    v3 = T.vertex_of("v3")
    assert st.root == v3
    assert all(st.points_to(c) == st.parent[c] for c in st.direction)
    assert len(st.direction) == 2
    assert [(s.kind, s.site, s.generating) for s in st.sinks] == [("vertex", v3, "v1")]


def test_orientation_midpoint_sink_edge():
    T = WeightedTree.from_edges([("u", "v", 2.0)])
    M = sq([[0, 2, 2], [2, 0, 2], [2, 2, 0]], ["u", "v", "x"])
    st = compute_x_orientation(T, M, "x", "u")
    assert st.sinks[0].kind == "edge"
    assert st.direction[st.sinks[0].site] == NONE


def test_orientation_rejects_far_anchor():
    T, M = path_case()
    with pytest.raises(ValueError):
        compute_x_orientation(T, M, "x", "v1")


def test_extend_on_path():
    T, M = path_case()
    out = extend_or_violate(T, ["v1", "v2", "v3"], M, "x")
    assert out.extended and out.stem.kind == "vertex"
    assert linf_gap(induced_metric(out.tree), M) == 0
    assert T.labels == ["v1", "v2", "v3"]


def test_extend_reports_square_violation():
    M = cut_square()
    T = induced_metric_tree(M, "abc")
    out = extend_or_violate(T, list("abc"), M, "d")
    assert not out.extended
    assert sorted(out.violation) == list("abcd")
    assert not four_point_ok(M, *[M.index(v) for v in out.violation])


def induced_metric_tree(M, labels):
    res, T = outliers_tree_fast(restrict_labels(M, labels))
    assert res.outliers == []
    return T


def test_extend_single_vertex():
    M = sq([[0, 4.0], [4.0, 0]], ["a", "x"])
    out = extend_or_violate(WeightedTree.single("a"), ["a"], M, "x")
    assert out.extended and induced_metric(out.tree)[0, 1] == 4.0


def test_fast_trivial_sizes():
    res, T = outliers_tree_fast(DistanceMatrix([], ["solo"]))
    assert res.outliers == [] and T.labels == ["solo"]


def test_square_cut_metric():
    M = cut_square()
    res, _ = outliers_tree_fast(M)
    assert res.k == 4 and verify_certificate(M, res)
    res = outliers_tree_quartic(M)
    assert res.certificate[0].points == tuple("abcd")


def test_exact_tree_metric_reconstructed():
    T = random_tree(150, np.random.default_rng(11))
    M = induced_metric(T)
    order = np.random.default_rng(2).permutation(M.n)
    res, T2 = outliers_tree_fast(M, order)
    assert res.outliers == [] and res.stats["fallbacks"] == 0
    assert linf_gap(induced_metric(T2), M) <= 1e-9 * M.diameter()


def test_single_edge_reduction():
    M = vc_tree_instance(SimpleGraph(2, [(0, 1)]), 0.1)
    assert len(exact_min_outliers(M, "tree")) == 1
    res, _ = outliers_tree_fast(M)
    assert 1 <= res.k <= 4


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 10), st.integers(0, 10 ** 6), st.sampled_from(["points", "noisy-tree"]))
def test_properties(n, seed, kind):
    """Certificates violate, the returned tree realizes the kept points, the
    count is within four times the optimum, and the quartic kept set is a
    tree metric."""
    rng = np.random.default_rng(seed)
    if kind == "points":
        M = DistanceMatrix.from_points(rng.random((n, 2)))
    else:
        base = induced_metric(random_tree(n, rng)).square()
        noise = np.triu(rng.uniform(0, 0.3, (n, n)), 1)
        M = DistanceMatrix.from_square(base + noise + noise.T + 2 * (1 - np.eye(n)))
    opt = len(exact_min_outliers(M, "tree"))
    res, T = outliers_tree_fast(M, rng.permutation(n))
    assert verify_certificate(M, res) and res.k <= 4 * opt
    assert res.stats["fallbacks"] == 0
    if len(res.kept) > 1:
        assert linf_gap(induced_metric(T), restrict_labels(M, res.kept)) <= 1e-9 * M.diameter()
    q = outliers_tree_quartic(M)
    assert verify_certificate(M, q) and q.k <= 4 * opt
    if len(q.kept) >= 4:
        K = restrict_labels(M, q.kept)
        assert all_quads_ok(K) and outliers_tree_fast(K)[0].outliers == []


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 40), st.integers(0, 10 ** 6))
def test_sink_exists_for_consistent_insertions(n, seed):
    """Inserting a label of an exact tree metric always finds a sink."""
    rng = np.random.default_rng(seed)
    M = induced_metric(random_tree(n, rng))
    x = M.labels[int(rng.integers(n))]
    rest = [lab for lab in M.labels if lab != x]
    T = induced_metric_tree(M, rest)
    D = M.square()
    xi = M.index(x)
    xs = min((M.index(v) for v in rest), key=lambda v: (D[xi, v], v))
    st = compute_x_orientation(T, M, x, M.labels[xs])
    assert st.sinks
    assert set(st.direction.values()) <= {UP, DOWN, NONE}


def test_non_metric_input_is_reported():
    M = sq([[0, 1, 5], [1, 0, 1], [5, 1, 0]], list("abc"))
    with pytest.raises(ValueError, match="not a metric"):
        outliers_tree_fast(M)
