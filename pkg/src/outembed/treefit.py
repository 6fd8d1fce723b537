"""Minimum-outlier embedding into tree metrics (4-approximations).

``outliers_tree_fast`` grows a tree one point at a time. For each new point
``x`` it orients the current tree towards candidate stem positions (one walk
per kept point, each stopping at the first already visited edge), picks a
sink of that orientation, and tries the leaf augmentation it suggests. When
the augmentation disagrees with the input at some kept point, a 4-tuple
containing ``x`` that violates the four-point condition is read off the
orientation records in constant time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .metric import DEFAULT_TOL, DistanceMatrix, Label, ToleranceConfig
from .result import OutlierResult, Violation
from .tree import StemLocation, WeightedTree

UP, DOWN, NONE = 1, -1, 0  # edge (child, parent) points to parent / child / nowhere


@dataclass(frozen=True)
class Sink:
    """``kind`` is ``"edge"`` (site = child vertex of the unoriented edge) or
    ``"vertex"`` (site = the vertex)."""

    kind: str
    site: int
    generating: Label


@dataclass
class OrientationState:
    """Partial orientation of a tree rooted at the nearest neighbour's vertex.

    Edges are keyed by their child vertex. ``direction[c]`` is ``UP`` when
    edge ``(c, parent[c])`` points to the parent, ``DOWN`` when it points to
    ``c`` and ``NONE`` for a sink edge. ``orienter[c]`` is the kept point
    whose walk visited the edge.
    """

    root: int
    parent: dict
    depth: dict
    direction: dict = field(default_factory=dict)
    orienter: dict = field(default_factory=dict)
    sinks: list = field(default_factory=list)
    candidates: list = field(default_factory=list)
    visits: int = 0

    @property
    def masked(self) -> set:
        return set(self.direction)

    def points_to(self, child: int) -> int | None:
        """Vertex that edge ``(child, parent[child])`` points to, if any."""
        d = self.direction.get(child)
        if d == UP:
            return self.parent[child]
        if d == DOWN:
            return child
        return None


class _Run:
    """Mutable state of one incremental fit over a distance matrix."""

    def __init__(self, M: DistanceMatrix, tol: ToleranceConfig):
        self.M = M
        self.rows = M.square().tolist()
        self.eta = M.eta(tol)
        self.labels = M.labels
        self.T = WeightedTree()
        self.kept: list[int] = []
        self.fallbacks = 0
        self.unverified = 0

    def vert(self, p: int) -> int:
        return self.T.vertex_of(self.labels[p])

    # orientation ---------------------------------------------------------

    def orient(self, x: int, xs: int) -> OrientationState:
        T, rows, eta = self.T, self.rows, self.eta
        root = self.vert(xs)
        parent, depth, order = T.rooted(root)
        st = OrientationState(root, parent, depth)
        st.visits = len(order)
        direction, orienter = st.direction, st.orienter
        rx, rxs = rows[x], rows[xs]
        for v in self.kept:
            if v == xs:
                continue
            # pendant length and stem position on the v .. x* path (from v)
            r = (rx[v] + rx[xs] - rxs[v]) / 2
            l = rx[v] - r
            cur = self.vert(v)
            passed = False
            if l <= eta:
                st.candidates.append(Sink("vertex", cur, v))
                passed = True
            pos = 0.0
            while cur != root:
                if cur in direction:
                    break
                p = parent[cur]
                b = pos + (depth[cur] - depth[p])
                orienter[cur] = v
                st.visits += 1
                if passed:
                    direction[cur] = DOWN
                elif b < l - eta:
                    direction[cur] = UP
                elif b <= l + eta:
                    direction[cur] = UP
                    st.candidates.append(Sink("vertex", p, v))
                    passed = True
                else:
                    direction[cur] = NONE
                    st.candidates.append(Sink("edge", cur, v))
                    passed = True
                cur, pos = p, b
        for s in st.candidates:
            if s.kind == "edge" or self._is_sink_vertex(st, s.site):
                st.sinks.append(s)
        return st

    def _is_sink_vertex(self, st: OrientationState, v: int) -> bool:
        if v != st.root and st.direction.get(v) != DOWN:
            return False
        par = st.parent[v]
        for c in self.T.neighbors(v):
            if c != par and st.direction.get(c) != UP:
                return False
        return True

    # one insertion step ------------------------------------------------------

    def augment(self, x: int, xs: int, u: int, st: OrientationState):
        """x-leaf augmentation at {x*, u}, in place. Returns the stem."""
        T, rows, eta = self.T, self.rows, self.eta
        rx = rows[x]
        path = [self.vert(u)]
        while path[-1] != st.root:
            path.append(st.parent[path[-1]])
        path.reverse()
        pos = [st.depth[v] for v in path]
        r = (rx[xs] + rx[u] - rows[xs][u]) / 2
        l = min(max(rx[xs] - r, 0.0), pos[-1])
        st.visits += len(path)
        return T._augment_on_path(self.labels[x], path, pos, l, max(r, 0.0), eta)

    def first_mismatch(self, x: int):
        """Distances from x in the augmented tree and the first kept point
        where they disagree with the input (or None)."""
        d = self.T.distances_from(self.vert(x))
        rx = self.rows[x]
        for w in self.kept:
            if abs(d[self.vert(w)] - rx[w]) > self.eta:
                return d, w
        return d, None

    def undo(self, x: int) -> None:
        self.T._remove_labels([self.labels[x]])

    def violates(self, quad) -> bool:
        if len(set(quad)) != 4:
            return False
        a, b, c, e = quad
        R = self.rows
        s = sorted((R[a][b] + R[c][e], R[a][c] + R[b][e], R[a][e] + R[b][c]))
        return s[2] > s[1] + self.eta

    def extract(self, x: int, xs: int, u: int, w: int, stem: StemLocation,
                st: OrientationState, dL: dict):
        """4-tuple through x that violates the four-point condition, found
        from the mismatch at w after augmenting at {x*, u}."""
        parent = st.parent
        # lowest common ancestor of u and w with the tree hung at x*
        marks = set()
        a = self.vert(u)
        while a is not None:
            marks.add(a)
            a = parent[a]
        y = self.vert(w)
        below = None
        while y not in marks:
            below, y = y, parent[y]
        st.visits += len(marks)
        if not (stem.kind == "vertex" and y == stem.vertex):
            return (x, xs, u, w)  # y off the stem
        rx = self.rows[x]
        dxw = dL[self.vert(w)]
        if rx[w] > dxw:
            return (x, xs, u, w)
        if below is None:
            return None  # w sits on the stem itself
        z = st.orienter.get(below)
        if z is None:
            return None
        if abs(dL[self.vert(z)] - rx[z]) <= self.eta:
            return (x, xs, z, w)
        return (x, xs, z, u)

    def brute_force(self, x: int):
        R = self.rows
        ks = np.array(self.kept)
        D = np.asarray(R)
        best, best_gap = None, -np.inf
        for ia in range(len(ks)):
            for ib in range(ia + 1, len(ks)):
                a, b = ks[ia], ks[ib]
                cs = ks[ib + 1:]
                if cs.size == 0:
                    continue
                s1 = D[x, a] + D[b, cs]
                s2 = D[x, b] + D[a, cs]
                s3 = D[x, cs] + D[a, b]
                s = np.sort(np.stack([s1, s2, s3]), axis=0)
                gap = s[2] - s[1]
                k = int(np.argmax(gap))
                if gap[k] > self.eta:
                    return (x, int(a), int(b), int(cs[k])), True
                if gap[k] > best_gap:
                    best, best_gap = (x, int(a), int(b), int(cs[k])), gap[k]
        return best, False

    def _not_metric(self) -> str:
        """Message for a step that no 4-tuple can explain: with fewer than
        three kept points only a broken triangle inequality is left."""
        R, eta = self.rows, self.eta
        pts = self.kept + [self.last_x]
        for a, b, c in combinations(pts, 3):
            for p, q, r in ((a, b, c), (b, c, a), (c, a, b)):
                if R[p][q] > R[p][r] + R[r][q] + eta:
                    lab = self.labels
                    return (f"input is not a metric: d({lab[p]!r}, {lab[q]!r}) exceeds the path "
                            f"through {lab[r]!r}")
        return "input is not a metric"

    def step(self, x: int):
        """Insert x. Returns None on success or the removed 4-tuple."""
        self.last_x = x
        if not self.kept:
            self.T = WeightedTree.single(self.labels[x])
            self.kept.append(x)
            return None
        rx = self.rows[x]
        xs = self.kept[0]
        for v in self.kept:
            if rx[v] < rx[xs] or (rx[v] == rx[xs] and v < xs):
                xs = v
        st = self.orient(x, xs)
        self.last_visits = st.visits
        if len(self.kept) == 1:
            sinks = [Sink("vertex", st.root, xs)]
        else:
            sinks = st.sinks
        if not sinks:
            self.fallbacks += 1
            return self._fallback(x, xs, st)
        u = sinks[0].generating
        stem = self.augment(x, xs, u, st)
        dL, w = self.first_mismatch(x)
        self.last_visits = st.visits + 2 * len(self.T)
        if w is None:
            self.kept.append(x)
            return None
        quad = self.extract(x, xs, u, w, stem, st, dL)
        self.undo(x)
        if quad is None or not self.violates(quad):
            self.fallbacks += 1
            quad, ok = self.brute_force(x)
            if not ok:
                self.unverified += 1
        return self._drop(quad)

    def _fallback(self, x: int, xs: int, st: OrientationState):
        for u in self.kept:
            stem = self.augment(x, xs, u, st)
            _, w = self.first_mismatch(x)
            if w is None:
                self.kept.append(x)
                return None
            self.undo(x)
        quad, ok = self.brute_force(x)
        if not ok:
            self.unverified += 1
        return self._drop(quad)

    def _drop(self, quad):
        if quad is None:
            raise ValueError(self._not_metric())
        members = [p for p in quad[1:]]
        self.T._remove_labels([self.labels[p] for p in members])
        gone = set(members)
        self.kept = [v for v in self.kept if v not in gone]
        if not self.kept:
            self.T = WeightedTree()
        return quad


def compute_x_orientation(T: WeightedTree, M: DistanceMatrix, x: Label, x_star: Label,
                          tol: ToleranceConfig = DEFAULT_TOL) -> OrientationState:
    """Orientation of ``T`` for inserting ``x`` next to its nearest kept
    neighbour ``x_star``.

    Kept points (the labels of ``T``) are processed in input order. Raises
    ``ValueError`` if ``x_star`` is not a nearest neighbour of ``x``.
    """
    run = _Run(M, tol)
    run.T = T
    run.kept = sorted(M.index(lab) for lab in T.labels)
    xi, si = M.index(x), M.index(x_star)
    if T.has_label(x):
        raise ValueError(f"{x!r} is already in the tree")
    rx = run.rows[xi]
    if min(rx[v] for v in run.kept) < rx[si] - run.eta:
        raise ValueError(f"{x_star!r} is not a nearest neighbour of {x!r}")
    st = run.orient(xi, si)
    lab = M.labels
    st.orienter = {c: lab[v] for c, v in st.orienter.items()}
    st.sinks = [Sink(s.kind, s.site, lab[s.generating]) for s in st.sinks]
    st.candidates = [Sink(s.kind, s.site, lab[s.generating]) for s in st.candidates]
    return st


@dataclass
class StepOutcome:
    tree: WeightedTree | None = None
    stem: StemLocation | None = None
    violation: tuple | None = None

    @property
    def extended(self) -> bool:
        return self.violation is None


def extend_or_violate(T: WeightedTree, X: Sequence[Label], M: DistanceMatrix, x: Label,
                      tol: ToleranceConfig = DEFAULT_TOL) -> StepOutcome:
    """Either a tree realizing the kept points ``X`` plus ``x``, or a 4-tuple
    through ``x`` violating the four-point condition. ``T`` must realize
    ``X`` and is not modified."""
    if set(X) != set(T.labels):
        raise ValueError("X must be the label set of T")
    run = _Run(M, tol)
    run.T = T.copy()
    run.kept = sorted(M.index(lab) for lab in X)
    xi = M.index(x)
    if not run.kept:
        return StepOutcome(WeightedTree.single(x), None)
    rx = run.rows[xi]
    xs = min(run.kept, key=lambda v: (rx[v], v))
    st = run.orient(xi, xs)
    sinks = st.sinks if len(run.kept) > 1 else [Sink("vertex", st.root, xs)]
    if sinks:
        stem = run.augment(xi, xs, sinks[0].generating, st)
        dL, w = run.first_mismatch(xi)
        if w is None:
            return StepOutcome(run.T, stem)
        quad = run.extract(xi, xs, sinks[0].generating, w, stem, st, dL)
        run.undo(xi)
        if quad is None or not run.violates(quad):
            quad, _ = run.brute_force(xi)
    else:
        quad = run._fallback(xi, xs, st)
        if quad is None:
            return StepOutcome(run.T, None)
    if quad is None:
        run.last_x = xi
        raise ValueError(run._not_metric())
    return StepOutcome(violation=tuple(M.labels[p] for p in quad))


def outliers_tree_fast(M: DistanceMatrix, order: Sequence[int] | None = None,
                       tol: ToleranceConfig = DEFAULT_TOL) -> tuple[OutlierResult, WeightedTree]:
    """Incremental 4-approximation in O(n^2) time.

    Returns the outlier result and a tree whose labelled vertices realize
    the kept points isometrically.
    """
    n = M.n
    order = list(range(n)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the point indices")
    run = _Run(M, tol)
    outliers, cert = [], []
    worst = 0.0
    total = 0
    for x in order:
        run.last_visits = 0
        size = max(len(run.kept), 1)
        quad = run.step(x)
        total += run.last_visits
        worst = max(worst, run.last_visits / size)
        if quad is not None:
            labs = tuple(M.labels[p] for p in quad)
            outliers.extend(labs)
            cert.append(Violation("quad", labs, labs, 0.0))
    kept = [M.labels[v] for v in sorted(run.kept)]
    stats = {
        "algorithm": "tree-fast",
        "edge_visits": total,
        "visits_per_kept_point": worst,
        "fallbacks": run.fallbacks,
        "unverified": run.unverified,
    }
    return OutlierResult(outliers, cert, kept, stats), run.T


def scan_quads(M: DistanceMatrix, slack: float = 0.0,
               tol: ToleranceConfig = DEFAULT_TOL) -> OutlierResult:
    """Remove every 4-tuple whose four-point defect exceeds ``slack``,
    scanning ``i < j < k < l`` lexicographically and skipping tuples that
    touch an already removed point."""
    D = M.square()
    n = M.n
    thr = slack + M.eta(tol)
    alive = np.ones(n, dtype=bool)
    outliers, cert = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if not alive[i]:
                break
            if not alive[j]:
                continue
            for k in range(j + 1, n):
                if not (alive[i] and alive[j]):
                    break
                if not alive[k]:
                    continue
                ls = np.nonzero(alive[k + 1:])[0] + k + 1
                if ls.size == 0:
                    continue
                s1 = D[i, j] + D[k, ls]
                s2 = D[i, k] + D[j, ls]
                s3 = D[i, ls] + D[j, k]
                hi = np.maximum(np.maximum(s1, s2), s3)
                lo = np.minimum(np.minimum(s1, s2), s3)
                mid = s1 + s2 + s3 - hi - lo
                bad = np.nonzero(hi - mid > thr)[0]
                if bad.size:
                    l = int(ls[bad[0]])
                    quad = (M.labels[i], M.labels[j], M.labels[k], M.labels[l])
                    alive[[i, j, k, l]] = False
                    outliers.extend(quad)
                    cert.append(Violation("quad", quad, quad, slack))
    kept = [M.labels[i] for i in range(n) if alive[i]]
    return OutlierResult(outliers, cert, kept)


def outliers_tree_quartic(M: DistanceMatrix,
                          tol: ToleranceConfig = DEFAULT_TOL) -> OutlierResult:
    """Exhaustive 4-tuple scan, O(n^4)."""
    res = scan_quads(M, 0.0, tol)
    res.stats["algorithm"] = "tree-naive"
    return res
