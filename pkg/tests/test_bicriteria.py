import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outembed.bicriteria import (BicriteriaParams, Dendrogram, GridSpec, InfeasibleParameters,
                                 bicriteria_euclidean, bicriteria_tree, bicriteria_ultrametric,
                                 fkw_optimal_ultrametric, grid_near_embed, gromov_tree, mst,
                                 subdominant_ultrametric)
from outembed.instances import planted_instance, random_tree, random_ultrametric
from outembed.metric import DistanceMatrix, all_triples_ok, linf_gap
from outembed.oracle import verify_certificate
from outembed.tree import induced_metric, parse_newick


def line(*xs):
    return DistanceMatrix.from_points(np.array(xs, dtype=float)[:, None], list("abcdefgh"[:len(xs)]))


def test_mst_examples():
    assert sorted((i, j) for i, j, _ in mst(line(0, 1, 3))) == [(0, 1), (1, 2)]
    flat = DistanceMatrix.from_square(np.ones((4, 4)) - np.eye(4))
    assert sorted(tuple(sorted((i, j))) for i, j, _ in mst(flat)) == [(0, 1), (0, 2), (0, 3)]
    assert mst(DistanceMatrix([], ["a"])) == []


def test_subdominant_line():
    M = line(0, 1, 3)
    U = subdominant_ultrametric(M).matrix()
    assert (U[0, 1], U[1, 2], U[0, 2]) == (1, 2, 2)
    assert linf_gap(M, U) == 1


def test_subdominant_fixed_point():
    M = random_ultrametric(30, np.random.default_rng(0))
    assert linf_gap(subdominant_ultrametric(M).matrix(), M) == 0


def test_fkw_line():
    U, err = fkw_optimal_ultrametric(line(0, 1, 3))
    Um = U.matrix()
    assert err == 0.5 and (Um[0, 1], Um[1, 2], Um[0, 2]) == (1.5, 2.5, 2.5)
    assert linf_gap(Um, line(0, 1, 3)) == 0.5


def test_fkw_trivial():
    M = random_ultrametric(10, np.random.default_rng(1))
    assert fkw_optimal_ultrametric(M)[1] == 0
    two = DistanceMatrix([2.0], ["a", "b"])
    U, err = fkw_optimal_ultrametric(two)
    assert err == 0 and U.matrix()[0, 1] == 2


def test_dendrogram_tree_and_newick():
    M = random_ultrametric(12, np.random.default_rng(2))
    D = subdominant_ultrametric(M)
    assert linf_gap(induced_metric(D.to_tree()), M) < 1e-12
    back = induced_metric(parse_newick(D.to_newick()))
    relabeled = DistanceMatrix(M.dist, [str(v) for v in M.labels])
    assert linf_gap(back, relabeled) < 1e-9
    assert Dendrogram(("a",)).to_tree().labels == ["a"]


def test_gromov_tree_exact_on_tree_metrics():
    M = induced_metric(random_tree(60, np.random.default_rng(3)))
    T = gromov_tree(M)
    assert linf_gap(induced_metric(T), M) <= 1e-9 * M.diameter()


def test_parameter_errors():
    with pytest.raises(InfeasibleParameters):
        BicriteriaParams(-0.1)
    with pytest.raises(InfeasibleParameters):
        GridSpec(0.0, 1.0)
    with pytest.raises(InfeasibleParameters):
        GridSpec(1e-9, 10.0)
    with pytest.raises(InfeasibleParameters):
        bicriteria_euclidean(line(0, 1, 2), BicriteriaParams(0.1))
    with pytest.raises(ValueError):
        BicriteriaParams(0.1, placement="random")


def test_grid_near_embed():
    grid = GridSpec(0.05, 3.0)
    p = grid_near_embed([1.0, 1.0], [[0.0, 0.0], [1.0, 0.0]], 0.1, grid)
    assert p is not None
    assert abs(np.linalg.norm(p) - 1) <= 0.1 and abs(np.linalg.norm(p - [1, 0]) - 1) <= 0.1
    assert grid_near_embed([5.0, 0.1], [[0.0, 0.0], [1.0, 0.0]], 0.1, grid) is None
    with pytest.raises(ValueError):
        grid_near_embed([1.0], [[0.0]], 0.0, grid)


def test_planted_ultrametric_example():
    inst = planted_instance("ultrametric", 32, 2, 0.05, seed=4)
    res, U, dist = bicriteria_ultrametric(inst.matrix, BicriteriaParams(0.05))
    assert res.k <= 6 and verify_certificate(inst.matrix, res)
    assert dist <= 2 * 0.05 * inst.matrix.diameter() * math.ceil(math.log2(32))
    assert all_triples_ok(U.matrix())


def test_exact_members_have_zero_distortion():
    for kind in ("ultrametric", "tree"):
        inst = planted_instance(kind, 20, 0, 0.0, seed=5)
        fit = bicriteria_ultrametric if kind == "ultrametric" else bicriteria_tree
        res, _, dist = fit(inst.matrix, BicriteriaParams(0.0))
        assert res.outliers == [] and dist <= 1e-9 * inst.matrix.diameter()


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 20), st.integers(0, 3), st.sampled_from([0.01, 0.05, 0.1]), st.integers(0, 10 ** 6))
def test_planted_tree(n, k, eps, seed):
    inst = planted_instance("tree", n, k, eps, seed)
    M = inst.matrix
    res, T, dist = bicriteria_tree(M, BicriteriaParams(eps))
    assert verify_certificate(M, res) and res.k <= 4 * k
    assert dist <= 8 * eps * M.diameter() * math.ceil(math.log2(n)) + 1e-9


def test_euclidean_planted():
    inst = planted_instance("euclidean", 7, 1, 0.05, seed=6, d=2)
    M = inst.matrix
    p = BicriteriaParams(0.05, d=2)
    res, coords = bicriteria_euclidean(M, p)
    assert res.k <= 2 and verify_certificate(M, res)
    keep = [M.index(v) for v in res.kept]
    E = np.sqrt(((coords[:, None] - coords[None]) ** 2).sum(-1))
    budget = p.C_d * math.sqrt(0.05) * M.diameter() + 0.05 * M.diameter()
    assert np.max(np.abs(E - M.square()[np.ix_(keep, keep)])) <= budget
