import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outembed.instances import SimpleGraph, random_ultrametric, vc_ultrametric_instance
from outembed.metric import DistanceMatrix, all_triples_ok, restrict_labels
from outembed.oracle import exact_min_outliers, verify_certificate
from outembed.ultrametric import outliers_ultrametric_cubic, outliers_ultrametric_fast

BOTH = [outliers_ultrametric_cubic, outliers_ultrametric_fast]


def sq(D, labels=None):
    return DistanceMatrix.from_square(np.array(D, dtype=float), labels)


@pytest.mark.parametrize("alg", BOTH)
def test_exact_ultrametric_has_no_outliers(alg):
    M = random_ultrametric(40, np.random.default_rng(3))
    res = alg(M)
    assert res.outliers == [] and res.certificate == []
    assert res.kept == list(M.labels)


@pytest.mark.parametrize("alg", BOTH)
def test_single_violating_triple(alg):
    M = sq([[0, 3, 2], [3, 0, 1], [2, 1, 0]], list("abc"))
    res = alg(M)
    assert sorted(res.outliers) == ["a", "b", "c"] and res.kept == []
    assert len(res.certificate) == 1
    assert set(res.certificate[0].points) == {"a", "b", "c"}
    assert verify_certificate(M, res)


def test_fast_hand_trace():
    """Nearest kept neighbour of d is b; w = a breaks the check, so the
    triple (d, b, a) goes and only c survives."""
    D = np.zeros((4, 4))
    for (i, j), v in {(0, 1): 2, (0, 2): 2, (1, 2): 1, (3, 1): 1, (3, 2): 1, (3, 0): 5}.items():
        D[i, j] = D[j, i] = v
    M = sq(D, list("abcd"))
    res = outliers_ultrametric_fast(M)
    assert res.certificate[0].points == ("d", "b", "a")
    assert res.kept == ["c"]


def test_fast_rejects_bad_order():
    with pytest.raises(ValueError):
        outliers_ultrametric_fast(random_ultrametric(4, np.random.default_rng(0)), order=[0, 0, 1, 2])


def test_k3_reduction_bounds():
    M = vc_ultrametric_instance(SimpleGraph.complete(3), 0.1)
    opt = len(exact_min_outliers(M, "ultrametric"))
    assert opt == 2
    for alg in BOTH:
        assert opt <= alg(M).k <= 6


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 11), st.integers(0, 10 ** 6), st.booleans())
def test_properties_on_random_metrics(n, seed, shuffle):
    """Certificates violate, the kept set is an ultrametric and the count is
    within three times the optimum."""
    rng = np.random.default_rng(seed)
    M = DistanceMatrix.from_points(rng.random((n, 2)))
    order = rng.permutation(n) if shuffle else None
    opt = len(exact_min_outliers(M, "ultrametric"))
    for res in (outliers_ultrametric_fast(M, order), outliers_ultrametric_cubic(M)):
        assert verify_certificate(M, res)
        if res.kept:
            assert all_triples_ok(restrict_labels(M, res.kept))
        assert res.k <= 3 * opt


def test_fast_read_count_is_linear_per_point():
    M = random_ultrametric(200, np.random.default_rng(5))
    res = outliers_ultrametric_fast(M)
    assert res.stats["reads_per_kept_point"] <= 2.0
