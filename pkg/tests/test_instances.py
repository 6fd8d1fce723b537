import numpy as np
import pytest

from outembed.instances import (SimpleGraph, all_graphs, format_graph, parse_graph, planted_instance,
                                vc_euclidean_instance, vc_tree_instance, vc_ultrametric_instance)
from outembed.metric import (all_quads_ok, all_triples_ok, four_point_ok, linf_gap, restrict_labels,
                             ultrametric_triple_ok, validate_metric)
from outembed.oracle import exact_min_outliers


def test_simple_graph_validation():
    G = SimpleGraph(3, [(1, 0), (2, 1)])
    assert G.edges == ((0, 1), (1, 2)) and G.adjacent(1, 0) and not G.adjacent(0, 2)
    for bad in ([(0, 0)], [(0, 3)], [(0, 1), (1, 0)]):
        with pytest.raises(ValueError):
            SimpleGraph(3, bad)


def test_graph_text_round_trip():
    G = SimpleGraph.path(4)
    assert parse_graph(format_graph(G)) == G
    assert parse_graph("# comment\n3\n0 1 # edge\n\n1,2\n") == SimpleGraph(3, [(0, 1), (1, 2)])
    for bad in ("", "x\n", "3\n0 1 2\n"):
        with pytest.raises(ValueError):
            parse_graph(bad)


def test_graph_counts():
    """Isomorphism classes on 1..5 vertices: 1, 2, 4, 11, 34."""
    assert [len(all_graphs(n, n)) for n in range(1, 6)] == [1, 2, 4, 11, 34]
    assert len(all_graphs(5)) == 52


def test_tree_instance_table():
    M = vc_tree_instance(SimpleGraph(2, [(0, 1)]), 0.1)
    d = lambda a, b: M[M.index(a), M.index(b)]
    assert (d("x0", "y0"), d("o", "x0"), d("o", "y1"), d("y0", "y1"), d("x0", "y1")) == (1, 2, 1, 2, 3)
    assert d("x0", "x1") == pytest.approx(3.9)
    assert validate_metric(M).ok
    idx = [M.index(v) for v in ("x0", "y0", "x1", "y1")]
    assert not four_point_ok(M, *idx)


def test_tree_instance_edgeless_is_tree_metric():
    M = vc_tree_instance(SimpleGraph(3), 0.1)
    assert all_quads_ok(M)


def test_ultrametric_instance():
    M = vc_ultrametric_instance(SimpleGraph(2, [(0, 1)]), 0.1)
    assert validate_metric(M).ok
    assert not ultrametric_triple_ok(M, M.index("w0"), M.index("u0"), M.index("u1"))
    assert all_triples_ok(vc_ultrametric_instance(SimpleGraph(3), 0.1))
    assert len(exact_min_outliers(vc_ultrametric_instance(SimpleGraph.path(3)), "ultrametric")) == 1
    cover_removed = restrict_labels(vc_ultrametric_instance(SimpleGraph.path(3)), ["u0", "u2", "w0", "w1", "w2"])
    assert all_triples_ok(cover_removed)


@pytest.mark.parametrize("ctor,hi", [(vc_tree_instance, 1), (vc_ultrametric_instance, 0.5),
                                     (vc_euclidean_instance, 1)])
def test_nu_range(ctor, hi):
    for nu in (0, hi, -0.1):
        with pytest.raises(ValueError):
            ctor(SimpleGraph(2, [(0, 1)]), nu)


def test_euclidean_instance_layouts():
    G = SimpleGraph(3, [(0, 1), (1, 2)])
    assert validate_metric(vc_euclidean_instance(G)).ok
    assert not validate_metric(vc_euclidean_instance(G, layout="line")).ok
    with pytest.raises(ValueError):
        vc_euclidean_instance(G, layout="spiral")
    M = vc_euclidean_instance(SimpleGraph(3))
    assert exact_min_outliers(M, "euclidean", d=2) == []


def test_all_reductions_are_metrics():
    for G in all_graphs(5):
        for M in (vc_tree_instance(G), vc_ultrametric_instance(G), vc_euclidean_instance(G)):
            assert validate_metric(M).ok


@pytest.mark.parametrize("kind", ["ultrametric", "tree", "euclidean"])
def test_planted_instance(kind):
    a = planted_instance(kind, 15, 3, 0.05, seed=9, d=2)
    b = planted_instance(kind, 15, 3, 0.05, seed=9, d=2)
    assert np.array_equal(a.matrix.dist, b.matrix.dist) and a.witness == b.witness
    assert validate_metric(a.matrix).ok and len(a.witness) == 3
    clean = [v for v in a.matrix.labels if v not in a.witness]
    diam = a.base.diameter()
    gap = linf_gap(restrict_labels(a.matrix, clean), restrict_labels(a.base, clean))
    assert gap <= 0.05 * diam + 1e-12
    W, C = a.witness, [a.matrix.index(v) for v in clean]
    shift = a.matrix.square()[np.ix_(W, C)] - a.base.square()[np.ix_(W, C)]
    assert shift.min() > 2 * 0.05 * diam


def test_planted_exact_member():
    inst = planted_instance("tree", 10, 0, 0.0, seed=1)
    assert inst.witness == [] and linf_gap(inst.matrix, inst.base) == 0


def test_planted_errors():
    with pytest.raises(ValueError):
        planted_instance("tree", 5, 5, 0.1, 0)
    with pytest.raises(ValueError):
        planted_instance("tree", 5, 1, 0.3, 0)
    with pytest.raises(ValueError):
        planted_instance("euclidean", 5, 1, 0.1, 0)
    with pytest.raises(ValueError):
        planted_instance("sphere", 5, 1, 0.1, 0)
