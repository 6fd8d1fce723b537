"""Bi-criteria outlier embeddings: remove few points, then embed the rest
with small additive (l-infinity) distortion.

Ultrametric and tree targets filter out tuples that violate a relaxed
three-point or four-point condition and fit the remainder with single
linkage or a Gromov-product tree. The Euclidean target follows the grid
search variant of the anchor-subset algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .euclidean import ConflictGraph, vertex_cover_2approx
from .metric import DEFAULT_TOL, DistanceMatrix, ToleranceConfig, linf_gap, restrict
from .result import OutlierResult, Violation
from .tree import WeightedTree, induced_metric, to_newick
from .treefit import scan_quads
from .ultrametric import scan_triples


class InfeasibleParameters(ValueError):
    """Parameters that cannot be run (for example a grid too fine to scan)."""


def _log2n(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 0


# spanning trees -----------------------------------------------------------------

def _prim(W: np.ndarray, maximize: bool = False) -> list[tuple[int, int, float]]:
    """Prim's algorithm on a dense weight matrix, O(n^2).

    Starts at vertex 0. Among equally light (heavy) candidates the
    lexicographically smallest edge wins.
    """
    n = W.shape[0]
    if n <= 1:
        return []
    sign = -1.0 if maximize else 1.0
    S = sign * np.asarray(W, dtype=float)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    key = S[0].copy()
    par = np.zeros(n, dtype=int)
    key[0] = np.inf
    edges = []
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, key)
        m = cand.min()
        vs = np.nonzero(cand == m)[0]
        if vs.size > 1:
            v = int(min(vs, key=lambda v: (min(par[v], v), max(par[v], v))))
        else:
            v = int(vs[0])
        u = int(par[v])
        edges.append((min(u, v), max(u, v), float(W[u, v])))
        in_tree[v] = True
        row = S[v]
        better = (~in_tree) & ((row < key) | ((row == key) & (v < par)))
        key[better] = row[better]
        par[better] = v
    return edges


def mst(M: DistanceMatrix) -> list[tuple[int, int, float]]:
    """Minimum spanning tree of the complete graph as ``(i, j, w)`` with
    ``i < j`` (point indices), in the order Prim adds them."""
    return _prim(M.square())


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        self.parent[rb] = ra
        return ra


# dendrograms ---------------------------------------------------------------------

@dataclass
class Dendrogram:
    """Rooted merge tree. Leaves are ``0..n-1``; merge ``t`` creates
    cluster ``n + t`` from clusters ``a`` and ``b`` at ``height``.

    The induced ultrametric is the height of the lowest merge joining two
    leaves.
    """

    labels: tuple
    merges: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.labels)

    def _members(self):
        members = {i: [i] for i in range(self.n)}
        for t, (a, b, h) in enumerate(self.merges):
            yield members[a], members[b], h
            members[self.n + t] = members.pop(a) + members.pop(b)

    def matrix(self) -> DistanceMatrix:
        U = np.zeros((self.n, self.n))
        for A, B, h in self._members():
            U[np.ix_(A, B)] = h
            U[np.ix_(B, A)] = h
        r, c = np.tril_indices(self.n, -1)
        return DistanceMatrix(U[r, c], self.labels)

    def shifted(self, s: float) -> "Dendrogram":
        """All merge heights raised by ``s``."""
        return Dendrogram(self.labels, [(a, b, h + s) for a, b, h in self.merges])

    def to_tree(self) -> WeightedTree:
        """Weighted tree whose leaf path lengths equal the ultrametric: a
        merge at height ``h`` sits ``h / 2`` above its leaves."""
        n = self.n
        if n == 1:
            return WeightedTree.single(self.labels[0])
        edges, height = [], {i: 0.0 for i in range(n)}
        name = {i: self.labels[i] for i in range(n)}
        steiner = []
        for t, (a, b, h) in enumerate(self.merges):
            node = ("#merge", t)
            steiner.append(node)
            name[n + t] = node
            height[n + t] = h
            for c in (a, b):
                edges.append((node, name[c], (h - height[c]) / 2))
        return WeightedTree.from_edges(edges, steiner=steiner)

    def to_newick(self) -> str:
        return to_newick(self.to_tree())


def _single_linkage(n: int, edges, labels) -> Dendrogram:
    uf = _UnionFind(n)
    cluster = list(range(n))  # cluster id of each union-find root
    merges = []
    for i, j, w in sorted(edges, key=lambda e: (e[2], e[0], e[1])):
        ri, rj = uf.find(i), uf.find(j)
        a, b = sorted((cluster[ri], cluster[rj]))
        r = uf.union(ri, rj)
        cluster[r] = n + len(merges)
        merges.append((a, b, w))
    return Dendrogram(tuple(labels), merges)


def subdominant_ultrametric(M: DistanceMatrix) -> Dendrogram:
    """Largest ultrametric below ``M`` (single linkage on the MST)."""
    return _single_linkage(M.n, mst(M), M.labels)


def fkw_optimal_ultrametric(M: DistanceMatrix) -> tuple[Dendrogram, float]:
    """Ultrametric closest to ``M`` in l-infinity and its error.

    The subdominant ultrametric lies below ``M`` with gap ``beta``; raising
    every merge by ``beta / 2`` halves the gap, which is optimal.
    """
    U = subdominant_ultrametric(M)
    beta = linf_gap(M, U.matrix()) if M.n > 1 else 0.0
    return U.shifted(beta / 2), beta / 2


# parameters ------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Grid of spacing ``tau`` covering ``[-half_width, half_width]^d``."""

    tau: float
    half_width: float
    max_cells_per_axis: int = 10 ** 6

    def __post_init__(self):
        if not self.tau > 0 or not math.isfinite(self.tau):
            raise InfeasibleParameters(f"grid spacing must be positive, got {self.tau!r}")
        if self.half_width / self.tau > self.max_cells_per_axis:
            raise InfeasibleParameters(
                f"grid spacing {self.tau:.3g} is too fine for half-width {self.half_width:.3g}")

    @property
    def K(self) -> int:
        return int(math.floor(self.half_width / self.tau + 1e-9))

    @classmethod
    def for_instance(cls, epsilon: float, d: int, diam: float, tau: float | None = None):
        if tau is None:
            tau = epsilon * diam / (2 * d * d)
        return cls(tau, 3 * diam)


@dataclass(frozen=True)
class BicriteriaParams:
    epsilon: float
    d: int | None = None
    C_d: float = 8.0
    slack_tree_factor: float = 4.0
    grid: GridSpec | None = None
    placement: str = "best"
    exhaustive: bool = False
    step1_branching: int = 256

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise InfeasibleParameters("epsilon must be nonnegative")
        if self.C_d <= 0 or self.slack_tree_factor <= 0:
            raise InfeasibleParameters("constants must be positive")
        if self.placement not in ("first", "best"):
            raise ValueError("placement must be 'first' or 'best'")


# ultrametric and tree -----------------------------------------------------------

def bicriteria_ultrametric(M: DistanceMatrix, params: BicriteriaParams,
                           tol: ToleranceConfig = DEFAULT_TOL):
    """Drop every triple violating the three-point condition by more than
    ``2 eps diam`` and fit single linkage to the rest.

    Returns ``(result, dendrogram, distortion)``; the distortion is checked
    against ``2 eps diam ceil(log2 n)``.
    """
    diam = M.diameter()
    slack = 2 * params.epsilon * diam
    res = scan_triples(M, slack, tol)
    keep = [M.index(lab) for lab in res.kept]
    if not keep:
        res.stats.update(algorithm="ultrametric-bicriteria", distortion=0.0)
        return res, Dendrogram(()), 0.0
    K = restrict(M, keep)
    U = subdominant_ultrametric(K)
    dist = linf_gap(K, U.matrix()) if K.n > 1 else 0.0
    bound = (slack + M.eta(tol)) * _log2n(M.n)
    assert dist <= bound + M.eta(tol), f"distortion {dist} above bound {bound}"
    res.stats.update(algorithm="ultrametric-bicriteria", distortion=dist, bound=bound)
    return res, U, dist


def min_eccentricity(M: DistanceMatrix) -> int:
    """Index of the point whose farthest neighbour is nearest (lowest wins)."""
    return int(np.argmin(M.square().max(axis=1)))


def gromov_tree(M: DistanceMatrix, base=None, tol: ToleranceConfig = DEFAULT_TOL) -> WeightedTree:
    """Tree from Gromov products at ``base`` (label; default: minimum
    eccentricity point).

    Products are closed under max-min chains via a maximum spanning tree,
    then realized as a rooted tree: leaf ``x`` at depth ``rho(x, base)`` and
    the branch point of ``x, y`` at depth equal to their closed product.
    Exact on tree metrics.
    """
    n = M.n
    if n == 1:
        return WeightedTree.single(M.labels[0])
    w = min_eccentricity(M) if base is None else M.index(base)
    D = M.square()
    r = D[w]
    P = (r[:, None] + r[None, :] - D) / 2
    np.fill_diagonal(P, r)
    eta = M.eta(tol)
    T = WeightedTree()
    top = [T._add_vertex(M.labels[i]) for i in range(n)]
    depth = {top[i]: float(r[i]) for i in range(n)}
    uf = _UnionFind(n)
    span = sorted(_prim(P, maximize=True), key=lambda e: (-e[2], e[0], e[1]))
    for i, j, p in span:
        ri, rj = uf.find(i), uf.find(j)
        ti, tj = top[ri], top[rj]
        p = min(p, depth[ti], depth[tj])
        s = T._add_vertex(None)
        depth[s] = p
        T._add_edge(s, ti, depth[ti] - p)
        T._add_edge(s, tj, depth[tj] - p)
        top[uf.union(ri, rj)] = s
    _contract_short(T, eta)
    T._cleanup()
    T.root = T.vertex_of(M.labels[w])
    return T


def _contract_short(T: WeightedTree, eta: float) -> None:
    """Contract edges of length at most ``eta`` unless both ends carry
    labels; those are lengthened to ``eta``."""
    while True:
        short = [(u, v) for u, v, wt in T.edges() if wt <= eta
                 and (T.label_of(u) is None or T.label_of(v) is None)]
        if not short:
            break
        u, v = short[0]
        if T.label_of(u) is None:
            u, v = v, u
        T._contract_edge(u, v)
    for u, v, wt in T.edges():
        if wt < eta:
            T._adj[u][v] = T._adj[v][u] = eta


def bicriteria_tree(M: DistanceMatrix, params: BicriteriaParams,
                    tol: ToleranceConfig = DEFAULT_TOL):
    """Drop every 4-tuple whose four-point defect exceeds
    ``slack_tree_factor * eps * diam`` and fit a Gromov-product tree to the
    rest. Returns ``(result, tree, distortion)``; ``stats`` records the
    measured constant ``distortion / (eps diam ceil(log2 n))``."""
    diam = M.diameter()
    slack = params.slack_tree_factor * params.epsilon * diam
    res = scan_quads(M, slack, tol)
    res.stats["algorithm"] = "tree-bicriteria"
    if not res.kept:
        res.stats["distortion"] = 0.0
        return res, WeightedTree(), 0.0
    K = restrict_labels_keep_order(M, res.kept)
    T = gromov_tree(K, tol=tol)
    dist = linf_gap(K, induced_metric(T)) if K.n > 1 else 0.0
    scale = params.epsilon * diam * _log2n(M.n)
    res.stats.update(distortion=dist, distortion_constant=(dist / scale) if scale > 0 else None)
    return res, T, dist


def restrict_labels_keep_order(M: DistanceMatrix, labels) -> DistanceMatrix:
    return restrict(M, [M.index(lab) for lab in labels])


# grid search ----------------------------------------------------------------------

def _grid_search(anchors: np.ndarray, targets: np.ndarray, budget: float, grid: GridSpec,
                 free: int, nonneg_last: bool = False, mode: str = "first",
                 collect: int = 0):
    """Grid points ``p`` (first ``free`` coordinates on the grid, the rest
    zero) with ``|d(p, a_i) - t_i| <= budget`` for every anchor.

    Coordinates are scanned in lexicographic order of grid index. Each
    coordinate is restricted to the intersection of the anchors' outer
    shells given the coordinates already fixed, and the last one is
    vectorized. ``mode="first"`` returns the first hit, ``"best"`` the one
    with the smallest worst-case error (earliest on ties). With
    ``collect > 0`` up to that many hits are returned as
    ``(points, errors)`` sorted by error.
    """
    tau, K = grid.tau, grid.K
    dim = anchors.shape[1]
    A = anchors[:, :free]
    base = (anchors[:, free:] ** 2).sum(axis=1)
    t = np.asarray(targets, dtype=float)
    best = [None, budget]
    hits: list = []

    def bounds(s, k, bud):
        rem = (t + bud) ** 2 - s
        if np.any(rem < 0):
            return None
        rr = np.sqrt(rem)
        lo = max(np.max(A[:, k] - rr), -grid.half_width)
        hi = min(np.min(A[:, k] + rr), grid.half_width)
        if nonneg_last and k == free - 1:
            lo = max(lo, 0.0)
        klo, khi = max(math.ceil(lo / tau - 1e-9), -K), min(math.floor(hi / tau + 1e-9), K)
        if nonneg_last and k == free - 1:
            klo = max(klo, 0)
        return (klo, khi) if klo <= khi else None

    def rec(prefix, s):
        k = len(prefix)
        bud = best[1]
        b = bounds(s, k, bud)
        if b is None:
            return False
        ks = np.arange(b[0], b[1] + 1)
        if k == free - 1:
            vals = ks * tau
            dist = np.sqrt(s[:, None] + (vals[None, :] - A[:, k, None]) ** 2)
            err = np.max(np.abs(dist - t[:, None]), axis=0)
            if collect:
                ok = np.nonzero(err <= budget)[0]
                for q in ok:
                    hits.append((float(err[q]), prefix + [int(ks[q])]))
                return False
            if mode == "first":
                ok = np.nonzero(err <= bud)[0]
                if ok.size:
                    q = int(ok[0])
                    best[0], best[1] = prefix + [int(ks[q])], float(err[q])
                    return True
                return False
            q = int(np.argmin(err))
            if err[q] <= bud and (best[0] is None or err[q] < best[1]):
                best[0], best[1] = prefix + [int(ks[q])], float(err[q])
            return False
        for kk in ks:
            v = kk * tau
            if rec(prefix + [int(kk)], s + (v - A[:, k]) ** 2):
                return True
        return False

    if free == 0:
        p = np.zeros(dim)
        err = float(np.max(np.abs(np.sqrt(base) - t))) if len(t) else 0.0
        if collect:
            return ([p], [err]) if err <= budget else ([], [])
        return (p, err) if err <= budget else None
    rec([], base.astype(float))
    if collect:
        hits.sort(key=lambda h: h[0])
        pts = []
        for e, ksel in hits[:collect]:
            p = np.zeros(dim)
            p[:free] = np.array(ksel) * tau
            pts.append(p)
        return pts, [h[0] for h in hits[:collect]]
    if best[0] is None:
        return None
    p = np.zeros(dim)
    p[:free] = np.array(best[0]) * tau
    return p, best[1]


def grid_near_embed(dists_to_anchors: Sequence[float], anchors, budget: float,
                    grid: GridSpec, mode: str = "first") -> np.ndarray | None:
    """A grid point within ``budget`` of every target anchor distance, or
    ``None``. Anchors are rows of coordinates."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    out = _grid_search(A, np.asarray(dists_to_anchors, dtype=float), budget, grid,
                       A.shape[1], mode=mode)
    return None if out is None else out[0]


def _normalized_sequence(D: np.ndarray, Y: Sequence[int], dp: int, budget: float,
                         grid: GridSpec, branching: int | None):
    """Depth-first search for grid points ``p_0..p_m`` in ``R^dp`` with
    ``p_0`` at the origin, ``p_i`` (``i <= dp``) in the half-space of the
    first ``i`` coordinates with coordinate ``i`` nonnegative, and every
    pair error within ``budget``. Candidates are tried best-first."""
    m = len(Y)
    P = np.zeros((m, dp))

    def rec(i):
        if i == m:
            return True
        free = min(i, dp)
        targets = D[Y[i], list(Y[:i])]
        pts, _ = _grid_search(P[:i], targets, budget, grid, free,
                              nonneg_last=i <= dp, collect=branching or 10 ** 9)
        for p in pts:
            P[i] = p
            if rec(i + 1):
                return True
        return False

    return P.copy() if rec(1) else None


def bicriteria_euclidean(M: DistanceMatrix, params: BicriteriaParams):
    """Grid version of the anchor-subset algorithm for ``R^d``.

    For each (d+1)-subset ``Y``: find a normalized grid sequence ``P``
    approximating ``Y`` within ``eps diam`` plus grid slack in the smallest
    dimension ``d'`` that works; place every other point on the grid
    within ``C_d sqrt(eps) diam + eps diam`` of its anchor distances (or
    reject it); join placed pairs whose distance error exceeds the same
    budget and cover those edges with a 2-approximate vertex cover. The
    smallest outlier set wins. Returns ``(result, coords)``.
    """
    d = params.d
    if d is None or d < 1:
        raise InfeasibleParameters("bicriteria_euclidean needs d >= 1")
    if not params.epsilon > 0:
        raise InfeasibleParameters("bicriteria_euclidean needs epsilon > 0")
    n = M.n
    D = M.square()
    diam = M.diameter()
    grid = params.grid or GridSpec.for_instance(params.epsilon, d, diam)
    eps = params.epsilon
    budget1 = eps * diam + grid.tau * math.sqrt(d)
    budget = params.C_d * math.sqrt(eps) * diam + eps * diam
    branching = None if params.exhaustive else params.step1_branching
    lab = M.labels
    best = None
    subsets = combinations(range(n), d + 1) if n > d + 1 else [tuple(range(n))]
    for Y in subsets:
        P = None
        for dp in range(1, d + 1):
            P = _normalized_sequence(D, Y, dp, budget1, grid, branching)
            if P is not None:
                break
        if P is None:
            continue
        placed, unplaced = {}, []
        for x in range(n):
            if x in Y:
                continue
            out = _grid_search(P, D[x, list(Y)], budget, grid, dp, mode=params.placement)
            if out is None:
                unplaced.append(x)
            else:
                placed[x] = out[0]
        zs = sorted(placed)
        edges = []
        for a, b in combinations(zs, 2):
            if abs(D[a, b] - float(np.linalg.norm(placed[a] - placed[b]))) > budget:
                edges.append((a, b))
        cover = vertex_cover_2approx(ConflictGraph(zs, edges))
        out = tuple(sorted(unplaced + cover))
        key = (len(out), out)
        if best is None or key < best[0]:
            best = (key, Y, dp, P, placed, unplaced, edges, cover)
            if not out:
                break
    if best is None:
        raise InfeasibleParameters("no anchor subset admits a normalized grid sequence")
    (_, out), Y, dp, P, placed, unplaced, edges, cover = best
    ylab = tuple(lab[i] for i in Y)
    grid_info = {"anchor_coords": P.tolist(), "tau": grid.tau, "half_width": grid.half_width}
    cert = [Violation("unplaced", ylab + (lab[x],), (lab[x],), budget, dim=dp, detail=grid_info)
            for x in unplaced]
    matched = set(cover)
    for a, b in sorted(edges):
        if a in matched and b in matched:
            detail = {"coords": [placed[a].tolist(), placed[b].tolist()]}
            cert.append(Violation("budget", (lab[a], lab[b]), (lab[a], lab[b]), budget, dim=dp,
                                  detail=detail))
            matched -= {a, b}
    gone = set(out)
    keep = [i for i in range(n) if i not in gone]
    coords = np.zeros((len(keep), d))
    for r, i in enumerate(keep):
        p = P[Y.index(i)] if i in Y else placed[i]
        coords[r, :dp] = p
    worst = 0.0
    if len(keep) > 1:
        diff = coords[:, None, :] - coords[None, :, :]
        E = np.sqrt((diff ** 2).sum(-1))
        worst = float(np.max(np.abs(E - D[np.ix_(keep, keep)])))
    assert worst <= budget + M.eta(), f"retained pair error {worst} above budget {budget}"
    stats = {
        "algorithm": "euclidean-bicriteria",
        "anchors": list(ylab),
        "anchor_dim": dp,
        "tau": grid.tau,
        "budget": budget,
        "distortion": worst,
    }
    return OutlierResult([lab[i] for i in out], cert, [lab[i] for i in keep], stats), coords
