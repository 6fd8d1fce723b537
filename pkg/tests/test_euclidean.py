import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outembed.euclidean import (ConflictGraph, conflict_graph, embedding_report, outliers_euclidean,
                                vertex_cover_2approx)
from outembed.instances import SimpleGraph, vc_euclidean_instance
from outembed.metric import DistanceMatrix, restrict_labels
from outembed.oracle import OracleBudget, exact_min_outliers, verify_certificate


def pts(X, labels=None):
    return DistanceMatrix.from_points(np.asarray(X, dtype=float), labels)


def pairwise(X):
    return np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))


def test_right_triangle_is_planar():
    rep = embedding_report(DistanceMatrix.from_square([[0, 3, 4], [3, 0, 5], [4, 5, 0]]), 2)
    assert rep.embeddable and rep.dimension == 2 and rep.max_error < 1e-12


def test_regular_simplex_needs_three_dims():
    M = DistanceMatrix.from_square(np.ones((4, 4)) - np.eye(4))
    assert not embedding_report(M, 2).embeddable
    assert embedding_report(M, 3).dimension == 3


def test_collinear_coordinates():
    rep = embedding_report(pts([[0], [1], [3]]), 2)
    assert rep.dimension == 1
    np.testing.assert_allclose(np.abs(rep.coordinates[:, 0]), [0, 1, 3], atol=1e-12)


def test_non_euclidean_metric():
    M = DistanceMatrix.from_square([[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]])
    rep = embedding_report(M, 3)
    assert not rep.embeddable and rep.min_eigenvalue < 0


def test_vertex_cover_2approx():
    assert vertex_cover_2approx(ConflictGraph(list("abc"), [("a", "b"), ("b", "c"), ("a", "c")])) == ["a", "b"]
    assert vertex_cover_2approx(ConflictGraph(list("abc"), [("a", "b"), ("b", "c")])) == ["a", "b"]
    assert vertex_cover_2approx(ConflictGraph(list("abc"))) == []
    with pytest.raises(ValueError):
        ConflictGraph(["a"], [("a", "a")])
    with pytest.raises(ValueError):
        ConflictGraph(["a", "b"], [("a", "b"), ("b", "a")])


def test_conflict_graph_consistent_points():
    M = pts(np.random.default_rng(0).random((6, 2)), list("abcdef"))
    rej, G = conflict_graph(M, list("abc"), 2)
    assert rej == [] and G.edges == [] and G.nodes == list("def")


def test_conflict_graph_mirror_pair():
    """p and q each fit the base segment, but only one mirror image of each
    can be kept together once their mutual distance is wrong."""
    X = np.array([[0, 0], [2, 0], [1, 1], [1, -1]], dtype=float)
    D = pairwise(X)
    D[2, 3] = D[3, 2] = 0.5
    M = DistanceMatrix.from_square(D, ["a", "b", "p", "q"])
    rej, G = conflict_graph(M, ["a", "b"], 2)
    assert rej == [] and G.edges == [("p", "q")]


def test_planar_points_no_outliers():
    X = np.random.default_rng(1).random((5, 2))
    M = pts(X)
    res, coords = outliers_euclidean(M, 2)
    assert res.outliers == [] and coords.shape == (5, 2)
    assert np.max(np.abs(pairwise(coords) - M.square())) < 1e-7


def test_inflated_point_is_sole_outlier():
    X = np.random.default_rng(2).random((7, 2))
    D = pairwise(X)
    D[3, :] += 1.0
    D[:, 3] += 1.0
    D[3, 3] = 0
    M = DistanceMatrix.from_square(D)
    res, _ = outliers_euclidean(M, 2)
    assert res.outliers == [3] and verify_certificate(M, res)


def test_single_edge_reduction():
    M = vc_euclidean_instance(SimpleGraph(2, [(0, 1)]), 0.1)
    assert len(exact_min_outliers(M, "euclidean", d=2)) == 1
    res, _ = outliers_euclidean(M, 2)
    assert 1 <= res.k <= 2 and verify_certificate(M, res)


def test_rejects_bad_dimension():
    with pytest.raises(ValueError):
        outliers_euclidean(pts([[0], [1]]), 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 9), st.integers(0, 3), st.integers(0, 10 ** 6))
def test_planted_points_within_twice_optimum(n, k, seed):
    """Certificates check out, the kept set is planar and the count is
    within twice the optimum."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    D = pairwise(X)
    for i in rng.choice(n, min(k, n - 3), replace=False):
        shift = rng.uniform(0.2, 0.6)
        D[i, :] += shift
        D[:, i] += shift
        D[i, i] = 0
    M = DistanceMatrix.from_square(D)
    opt = len(exact_min_outliers(M, "euclidean", OracleBudget(), d=2))
    res, coords = outliers_euclidean(M, 2)
    assert verify_certificate(M, res) and res.k <= 2 * opt
    if len(res.kept) > 1:
        K = restrict_labels(M, res.kept).square()
        assert np.max(np.abs(pairwise(coords) - K)) <= 1e-6 * M.diameter()
