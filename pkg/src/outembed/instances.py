"""Test instances: vertex-cover reductions and planted-outlier metrics.

Each reduction turns a graph into a metric whose minimum number of
outliers (for the matching target) equals the graph's minimum vertex
cover. Planted instances perturb an exact member of a target class by
bounded noise and corrupt a known witness set of points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np

from .metric import DistanceMatrix, validate_metric
from .tree import WeightedTree, induced_metric


@dataclass(frozen=True)
class SimpleGraph:
    n: int
    edges: tuple = ()

    def __post_init__(self):
        norm = []
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop at {a}")
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"edge ({a}, {b}) out of range for {self.n} vertices")
            norm.append((min(a, b), max(a, b)))
        if len(set(norm)) != len(norm):
            raise ValueError("duplicate edge")
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    def adjacent(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in set(self.edges)

    @classmethod
    def complete(cls, n: int) -> "SimpleGraph":
        return cls(n, tuple(combinations(range(n), 2)))

    @classmethod
    def path(cls, n: int) -> "SimpleGraph":
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))


def parse_graph(text: str) -> SimpleGraph:
    """First non-blank line: vertex count; then one ``a b`` edge per line
    (zero-based). Blank lines and ``#`` comments are ignored."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty graph file")
    try:
        n = int(lines[0])
        edges = []
        for ln in lines[1:]:
            parts = ln.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"bad edge line {ln!r}")
            edges.append((int(parts[0]), int(parts[1])))
    except ValueError as e:
        raise ValueError(f"malformed graph file: {e}") from None
    return SimpleGraph(n, tuple(edges))


def format_graph(G: SimpleGraph) -> str:
    return "\n".join([str(G.n)] + [f"{a} {b}" for a, b in G.edges]) + "\n"


def _canonical(n: int, edges) -> tuple:
    best = None
    for p in permutations(range(n)):
        key = tuple(sorted(tuple(sorted((p[a], p[b]))) for a, b in edges))
        if best is None or key < best:
            best = key
    return best


def all_graphs(max_n: int, min_n: int = 1) -> list[SimpleGraph]:
    """One representative of every isomorphism class of simple graphs on
    ``min_n..max_n`` vertices (brute-force canonical forms; ``max_n <= 6``)."""
    if max_n > 6:
        raise ValueError("exhaustive graph enumeration is limited to 6 vertices")
    out = []
    for n in range(min_n, max_n + 1):
        pairs = list(combinations(range(n), 2))
        seen = set()
        for mask in range(1 << len(pairs)):
            es = [pairs[b] for b in range(len(pairs)) if mask >> b & 1]
            c = _canonical(n, es)
            if c not in seen:
                seen.add(c)
                out.append(SimpleGraph(n, c))
    return out


def _check_nu(nu: float, hi: float) -> None:
    if not 0 < nu < hi:
        raise ValueError(f"nu must lie in (0, {hi:g}), got {nu!r}")


def vc_tree_instance(G: SimpleGraph, nu: float = 0.1) -> DistanceMatrix:
    """Star-like near-tree metric on ``x_i, y_i`` per vertex plus ``o``.

    Labels are ``"x{i}"``, ``"y{i}"`` and ``"o"``. Edges of ``G`` shorten
    ``x_i x_j`` from 4 to ``4 - nu``, and every edge then forces one of its
    endpoints' pairs to be dropped.
    """
    _check_nu(nu, 1.0)
    n = G.n
    labels = [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)] + ["o"]
    S = np.zeros((2 * n + 1, 2 * n + 1))
    X, Y, o = range(n), range(n, 2 * n), 2 * n
    for i in range(n):
        S[X[i], Y[i]] = 1
        S[o, X[i]] = 2
        S[o, Y[i]] = 1
        for j in range(n):
            if i != j:
                S[Y[i], Y[j]] = 2
                S[X[i], Y[j]] = 3
                S[X[i], X[j]] = 4 - nu if G.adjacent(i, j) else 4
    S = np.maximum(S, S.T)
    return DistanceMatrix.from_square(S, labels)


def vc_ultrametric_instance(G: SimpleGraph, nu: float = 0.1) -> DistanceMatrix:
    """Near-ultrametric on pairs ``u_i, w_i`` at distance ``2 nu``; edges
    of ``G`` shorten ``u_i u_j`` from 1 to ``1 - nu``. Labels ``"u{i}"``,
    ``"w{i}"``."""
    _check_nu(nu, 0.5)
    n = G.n
    labels = [f"u{i}" for i in range(n)] + [f"w{i}" for i in range(n)]
    S = np.ones((2 * n, 2 * n))
    np.fill_diagonal(S, 0)
    for i in range(n):
        S[i, n + i] = S[n + i, i] = 2 * nu
    for a, b in G.edges:
        S[a, b] = S[b, a] = 1 - nu
    return DistanceMatrix.from_square(S, labels)


def vc_euclidean_instance(G: SimpleGraph, nu: float = 0.1, layout: str = "arc") -> DistanceMatrix:
    """Near-planar metric on ``x_i, y_i, z_i`` per vertex (labels
    ``"x{i}"``, ``"y{i}"``, ``"z{i}"``).

    All distances are Euclidean except ``z_i z_j`` for edges of ``G``,
    which are shortened by ``nu``. With ``layout="line"`` the points sit at
    ``x_i = (i, -1)``, ``z_i = (i, 0)``, ``y_i = (i, 1)``; collinear ``z``
    points then break the triangle inequality whenever two edges share a
    middle vertex without the outer edge. The default ``"arc"`` layout
    puts ``z_i`` on a circular arc (with ``x_i`` and ``y_i`` one unit
    inside and outside along the radius) and enlarges the radius until the
    result is a metric.
    """
    _check_nu(nu, 1.0)
    n = G.n
    labels = [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)] + [f"z{i}" for i in range(n)]

    def build(P):
        diff = P[:, None, :] - P[None, :, :]
        S = np.sqrt((diff ** 2).sum(-1))
        for a, b in G.edges:
            S[2 * n + a, 2 * n + b] -= nu
            S[2 * n + b, 2 * n + a] -= nu
        return DistanceMatrix.from_square(S, labels)

    if layout == "line":
        idx = np.arange(1, n + 1, dtype=float)
        P = np.vstack([np.column_stack([idx, -np.ones(n)]),
                       np.column_stack([idx, np.ones(n)]),
                       np.column_stack([idx, np.zeros(n)])])
        return build(P)
    if layout != "arc":
        raise ValueError(f"unknown layout {layout!r}")
    theta = np.linspace(0, math.pi / 2, n) if n > 1 else np.zeros(1)
    u = np.column_stack([np.cos(theta), np.sin(theta)])
    R = max(4.0, 2.0 * n)
    for _ in range(60):
        P = np.vstack([(R - 1) * u, (R + 1) * u, R * u])
        M = build(P)
        if validate_metric(M).ok:
            return M
        R *= 2
    raise RuntimeError("could not make the arc layout metric")


def random_tree(n: int, rng: np.random.Generator, wmin: float = 0.5, wmax: float = 1.5) -> WeightedTree:
    """Random attachment tree on labels ``0..n-1``, every vertex labelled."""
    if n == 1:
        return WeightedTree.single(0)
    edges = [(int(rng.integers(0, i)), i, float(rng.uniform(wmin, wmax))) for i in range(1, n)]
    return WeightedTree.from_edges(edges)


def random_ultrametric(n: int, rng: np.random.Generator) -> DistanceMatrix:
    """Subdominant ultrametric of a random symmetric matrix (distances in
    ``[1, 2]``)."""
    from .bicriteria import subdominant_ultrametric

    r, c = np.tril_indices(n, -1)
    M = DistanceMatrix(rng.uniform(1.0, 2.0, size=r.size), list(range(n)))
    return subdominant_ultrametric(M).matrix()


def random_points(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random((n, d))


@dataclass
class PlantedInstance:
    matrix: DistanceMatrix
    witness: list
    epsilon_used: float
    kind: str
    base: DistanceMatrix


def planted_instance(kind: str, n: int, k: int, eps: float, seed: int, d: int | None = None) -> PlantedInstance:
    """Exact class member with bounded noise and ``k`` corrupted points.

    Every pair gets ``c (1 + U)`` added with ``c = eps diam / 2`` and ``U``
    uniform on ``[0, 1]``. A constant shift keeps ultrametrics and tree
    metrics in their class, so the clean points lie within ``eps diam / 2``
    of the class (``eps diam`` for point sets), and positive additions keep
    the triangle inequality. Each witness row is then raised entrywise by
    shifts in ``(2 eps diam, diam / 2]``: a common part plus a random part,
    since a constant row shift would keep a tree metric a tree metric. The
    row is finally lowered to its shortest-path closure through the other
    points, which restores the triangle inequality and keeps every shift
    above ``2 eps diam``.
    """
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < n")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if k and 4 * eps >= 1:
        raise ValueError("corruption shift needs 2 eps < 1/2")
    rng = np.random.default_rng(seed)
    if kind == "ultrametric":
        base = random_ultrametric(n, rng)
    elif kind == "tree":
        base = induced_metric(random_tree(n, rng))
    elif kind == "euclidean":
        if d is None or d < 1:
            raise ValueError("euclidean instances need d >= 1")
        base = DistanceMatrix.from_points(random_points(n, d, rng))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    B = base.square()
    diam = base.diameter()
    c = eps * diam / 2
    U = rng.random((n, n))
    U = np.triu(U, 1)
    U = U + U.T
    S = B + c * (1 + U)
    np.fill_diagonal(S, 0)
    witness = sorted(int(i) for i in rng.choice(n, size=k, replace=False)) if k else []
    lo, hi = 2 * eps * diam, diam / 2
    for i in witness:
        s = hi - (hi - lo) * rng.random()  # in (lo, hi]
        row = S[i] + s + (hi - s) * rng.random(n)
        others = np.arange(n) != i
        row = np.min(row[others][:, None] + S[np.ix_(others, others)], axis=0)
        S[i, others] = S[others, i] = row
    M = DistanceMatrix.from_square(S, list(range(n)))
    return PlantedInstance(M, witness, eps, kind, base)
