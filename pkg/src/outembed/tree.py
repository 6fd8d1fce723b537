"""Edge-weighted trees whose vertices are either labelled points or unlabelled
Steiner vertices.

The public functions (``leaf_augment``, ``remove_labels``) never modify their
input; the underscore methods on ``WeightedTree`` mutate in place and are
used by the incremental tree-fitting loop, which owns its tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .metric import DEFAULT_TOL, DistanceMatrix, Label


@dataclass(frozen=True)
class StemLocation:
    """Where a new leaf hangs off a tree.

    ``kind`` is ``"vertex"`` when the stem is an existing vertex, or
    ``"edge"`` when edge ``edge`` was subdivided at distance ``offset`` from
    ``edge[0]``. ``vertex`` is the stem's id in the augmented tree in both
    cases.
    """

    kind: str
    vertex: int
    edge: tuple | None = None
    offset: float = 0.0


class WeightedTree:
    """Tree with positive edge weights and optionally labelled vertices."""

    def __init__(self):
        self._adj: dict[int, dict[int, float]] = {}
        self._label: dict[int, Label | None] = {}
        self._vertex: dict[Label, int] = {}
        self._order: dict[Label, None] = {}  # labels in insertion order
        self._next = 0
        self.root: int | None = None

    # construction ------------------------------------------------------

    @classmethod
    def single(cls, label: Label) -> "WeightedTree":
        T = cls()
        T._add_vertex(label)
        return T

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], steiner: Iterable = (),
                   eta: float = 0.0) -> "WeightedTree":
        """Build from ``(node, node, weight)`` triples.

        Node names are point labels unless listed in ``steiner``. Edges of
        weight at most ``eta`` are contracted.
        """
        steiner = set(steiner)
        T = cls()
        ids: dict = {}

        def vid(name):
            if name not in ids:
                ids[name] = T._add_vertex(None if name in steiner else name)
            return ids[name]

        zero = []
        for a, b, w in edges:
            if a == b:
                raise ValueError(f"self-loop at {a!r}")
            u, v = vid(a), vid(b)
            if v in T._adj[u]:
                raise ValueError(f"duplicate edge {a!r}-{b!r}")
            if w < -eta:
                raise ValueError(f"negative edge weight {w!r}")
            T._adj[u][v] = T._adj[v][u] = float(w)
            if w <= eta:
                zero.append((u, v))
        if len(T._adj) > 1 and T.n_edges() != len(T._adj) - 1:
            raise ValueError("edges do not form a tree")
        if len(T._adj) > 1 and not T._connected():
            raise ValueError("edges do not form a tree")
        while zero:
            u, v = zero[0]
            if T._label[u] is None and T._label[v] is not None:
                u, v = v, u
            T._contract_edge(u, v)
            zero = [(a, b) for a, b, w in T.edges() if w <= eta]
        return T

    def copy(self) -> "WeightedTree":
        T = WeightedTree()
        T._adj = {v: dict(nb) for v, nb in self._adj.items()}
        T._label = dict(self._label)
        T._vertex = dict(self._vertex)
        T._order = dict(self._order)
        T._next = self._next
        T.root = self.root
        return T

    # queries -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._adj)

    def __repr__(self) -> str:
        return f"WeightedTree(vertices={len(self._adj)}, labels={len(self._vertex)})"

    @property
    def labels(self) -> list:
        return list(self._order)

    def vertices(self) -> list[int]:
        return list(self._adj)

    def edges(self) -> list[tuple[int, int, float]]:
        return [(u, v, w) for u, nb in self._adj.items() for v, w in nb.items() if u < v]

    def n_edges(self) -> int:
        return sum(len(nb) for nb in self._adj.values()) // 2

    def vertex_of(self, label: Label) -> int:
        try:
            return self._vertex[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in tree") from None

    def label_of(self, v: int) -> Label | None:
        return self._label[v]

    def has_label(self, label: Label) -> bool:
        return label in self._vertex

    def neighbors(self, v: int) -> dict[int, float]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def weight(self, u: int, v: int) -> float:
        return self._adj[u][v]

    def distances_from(self, src: int) -> dict[int, float]:
        dist = {src: 0.0}
        stack = [src]
        adj = self._adj
        while stack:
            u = stack.pop()
            du = dist[u]
            for v, w in adj[u].items():
                if v not in dist:
                    dist[v] = du + w
                    stack.append(v)
        return dist

    def rooted(self, root: int):
        """Parent pointers, depths and a preorder for the tree hung at ``root``."""
        parent = {root: None}
        depth = {root: 0.0}
        order = [root]
        stack = [root]
        adj = self._adj
        while stack:
            u = stack.pop()
            du = depth[u]
            for v, w in adj[u].items():
                if v not in parent:
                    parent[v] = u
                    depth[v] = du + w
                    order.append(v)
                    stack.append(v)
        return parent, depth, order

    def path(self, u: int, v: int) -> list[int]:
        """Vertices on the unique ``u``-``v`` path, inclusive."""
        parent, _, _ = self.rooted(u)
        if v not in parent:
            raise KeyError(f"vertex {v} not in tree")
        out = [v]
        while out[-1] != u:
            out.append(parent[out[-1]])
        return out[::-1]

    def distance(self, u: int, v: int) -> float:
        if u not in self._adj or v not in self._adj:
            raise KeyError("vertex not in tree")
        return self.distances_from(u)[v]

    # mutation (in place) ------------------------------------------------

    def _add_vertex(self, label: Label | None = None) -> int:
        v = self._next
        self._next += 1
        self._adj[v] = {}
        self._label[v] = label
        if label is not None:
            if label in self._vertex:
                raise ValueError(f"label {label!r} already in tree")
            self._vertex[label] = v
            self._order[label] = None
        return v

    def _set_label(self, v: int, label: Label) -> None:
        if label in self._vertex:
            raise ValueError(f"label {label!r} already in tree")
        if self._label[v] is not None:
            raise ValueError(f"vertex {v} already labelled")
        self._label[v] = label
        self._vertex[label] = v
        self._order[label] = None

    def _unlabel(self, label: Label) -> int:
        v = self._vertex.pop(label)
        del self._order[label]
        self._label[v] = None
        return v

    def _add_edge(self, u: int, v: int, w: float) -> None:
        self._adj[u][v] = w
        self._adj[v][u] = w

    def _subdivide(self, a: int, b: int, offset: float) -> int:
        """Split edge ``a``-``b`` by a Steiner vertex at ``offset`` from ``a``."""
        w = self._adj[a].pop(b)
        del self._adj[b][a]
        s = self._add_vertex(None)
        self._add_edge(a, s, offset)
        self._add_edge(s, b, w - offset)
        return s

    def _contract_edge(self, u: int, v: int) -> None:
        """Merge ``v`` into ``u`` (labels move along)."""
        if v not in self._adj[u]:
            return
        lu, lv = self._label[u], self._label[v]
        if lu is not None and lv is not None:
            raise ValueError(f"zero-length edge between labels {lu!r} and {lv!r}")
        del self._adj[u][v]
        for x, w in self._adj.pop(v).items():
            if x == u:
                continue
            del self._adj[x][v]
            self._add_edge(u, x, w)
        if lv is not None:
            self._label[u] = lv
            self._vertex[lv] = u
        del self._label[v]
        if self.root == v:
            self.root = u

    def _attach_leaf(self, label: Label, stem: int, r: float, eta: float) -> int:
        """Hang ``label`` at distance ``r`` from ``stem``; r within ``eta`` of
        zero labels an unlabelled stem directly."""
        if r <= eta and self._label[stem] is None:
            self._set_label(stem, label)
            return stem
        v = self._add_vertex(label)
        self._add_edge(stem, v, max(r, eta) if r <= eta else r)
        return v

    def _place(self, path: list[int], pos: list[float], l: float, eta: float):
        """Locate the point at distance ``l`` along ``path`` (positions
        ``pos`` measured from ``path[0]``). Returns ``("vertex", k)`` or
        ``("edge", k, t)`` for the edge ``path[k]``-``path[k+1]`` at offset
        ``t`` from ``path[k]``. Points within ``eta`` of a vertex snap to it."""
        for k, p in enumerate(pos):
            if abs(p - l) <= eta:
                return ("vertex", k)
            if p > l:
                return ("edge", k - 1, l - pos[k - 1])
        return ("vertex", len(pos) - 1)

    def _augment_on_path(self, label: Label, path: list[int], pos: list[float],
                         l: float, r: float, eta: float) -> StemLocation:
        where = self._place(path, pos, l, eta)
        if where[0] == "vertex":
            stem = path[where[1]]
            loc = StemLocation("vertex", stem)
        else:
            k, t = where[1], where[2]
            a, b = path[k], path[k + 1]
            stem = self._subdivide(a, b, t)
            loc = StemLocation("edge", stem, (a, b), t)
        self._attach_leaf(label, stem, r, eta)
        return loc

    def _cleanup(self, candidates: Iterable[int] | None = None) -> None:
        """Prune unlabelled leaves and splice out unlabelled degree-2 vertices."""
        adj, lab = self._adj, self._label
        queue = list(adj if candidates is None else candidates)
        while queue:
            v = queue.pop()
            if v not in adj or lab[v] is not None:
                continue
            deg = len(adj[v])
            if deg == 0:
                if len(adj) > 1:
                    raise AssertionError("isolated vertex in a tree")
                continue
            if deg == 1:
                (u,) = adj[v]
                del adj[u][v]
                del adj[v]
                del lab[v]
                if self.root == v:
                    self.root = u
                queue.append(u)
            elif deg == 2:
                (a, wa), (b, wb) = adj[v].items()
                del adj[a][v]
                del adj[b][v]
                del adj[v]
                del lab[v]
                self._add_edge(a, b, wa + wb)
                if self.root == v:
                    self.root = a
        if len(adj) == 1:
            (v,) = adj
            if lab[v] is None:
                adj.clear()
                lab.clear()

    def _remove_labels(self, labels: Iterable[Label]) -> None:
        touched = [self._unlabel(lab) for lab in labels]
        self._cleanup(touched)

    def _connected(self) -> bool:
        if not self._adj:
            return True
        start = next(iter(self._adj))
        return len(self.distances_from(start)) == len(self._adj)

    # invariants ---------------------------------------------------------

    def check(self) -> None:
        """Raise ``AssertionError`` if a structural invariant fails."""
        if not self._adj:
            return
        assert self.n_edges() == len(self._adj) - 1, "edge count"
        assert self._connected(), "connected"
        for u, v, w in self.edges():
            assert w > 0, f"nonpositive edge {u}-{v}: {w}"
        for v, nb in self._adj.items():
            if self._label[v] is None:
                assert len(nb) >= 3, f"Steiner vertex {v} has degree {len(nb)}"
        for lab, v in self._vertex.items():
            assert self._label[v] == lab


# ---------------------------------------------------------------------------


def tree_distance(T: WeightedTree, u: int, v: int) -> float:
    """Length of the ``u``-``v`` path."""
    return T.distance(u, v)


def _default_eta(*d: float) -> float:
    return DEFAULT_TOL.eta(max(d))


def leaf_augment(T: WeightedTree, a: Label, u: Label, v: Label,
                 d_au: float, d_av: float, d_uv: float,
                 eta: float | None = None) -> tuple[WeightedTree, StemLocation]:
    """Attach a new labelled leaf ``a`` so it sits at distance ``d_au`` from
    ``u`` and ``d_av`` from ``v``.

    The stem lies on the ``u``-``v`` path at distance ``d_au - r`` from ``u``
    where ``r = (d_au + d_av - d_uv) / 2`` is the length of the new pendant
    edge. The input tree is left untouched.
    """
    if eta is None:
        eta = _default_eta(d_au, d_av, d_uv)
    if T.has_label(a):
        raise ValueError(f"label {a!r} already in tree")
    pu, pv = T.vertex_of(u), T.vertex_of(v)
    path = T.path(pu, pv)
    pos = [0.0]
    for x, y in zip(path, path[1:]):
        pos.append(pos[-1] + T.weight(x, y))
    if abs(pos[-1] - d_uv) > eta:
        raise ValueError(f"d_uv={d_uv!r} but tree distance is {pos[-1]!r}")
    r = (d_au + d_av - d_uv) / 2
    l = d_au - r
    if l < -eta or l > d_uv + eta or r < -eta:
        raise ValueError(f"stem position {l!r} outside [0, {d_uv!r}]")
    l = min(max(l, 0.0), pos[-1])
    T2 = T.copy()
    loc = T2._augment_on_path(a, path, pos, l, max(r, 0.0), eta)
    return T2, loc


def remove_labels(T: WeightedTree, S: Iterable[Label]) -> WeightedTree:
    """Drop the labels in ``S``; freed leaves are pruned and unlabelled
    degree-2 vertices spliced out, so survivors keep their distances."""
    S = list(S)
    if set(T.labels) <= set(S):
        raise ValueError("cannot remove every label")
    T2 = T.copy()
    T2._remove_labels(S)
    return T2


def induced_metric(T: WeightedTree) -> DistanceMatrix:
    """Distance matrix of the labelled vertices, in label insertion order."""
    labels = T.labels
    if not labels:
        raise ValueError("tree has no labels")
    verts = T.vertices()
    pos = {v: i for i, v in enumerate(verts)}
    E = T.edges()
    if not E:
        return DistanceMatrix([], labels)
    rows = [pos[u] for u, _, _ in E]
    cols = [pos[v] for _, v, _ in E]
    w = [w for _, _, w in E]
    G = coo_matrix((w, (rows, cols)), shape=(len(verts), len(verts))).tocsr()
    src = [pos[T.vertex_of(lab)] for lab in labels]
    D = dijkstra(G, directed=False, indices=src)[:, src]
    r, c = np.tril_indices(len(labels), -1)
    return DistanceMatrix(D[r, c], labels)


# Newick ----------------------------------------------------------------------

_SPECIAL = set("(),;:'[] \t\n")


def _label_key(lab):
    if isinstance(lab, (int, float, np.integer, np.floating)):
        return (0, float(lab), "")
    return (1, 0.0, str(lab))


def _quote(lab) -> str:
    s = str(lab)
    if any(ch in _SPECIAL for ch in s) or s == "":
        return "'" + s.replace("'", "''") + "'"
    return s


def _fmt_len(w: float) -> str:
    return f"{w:.12g}"


def to_newick(T: WeightedTree) -> str:
    """Newick text with branch lengths.

    Unrooted trees are rooted at the smallest label. Children are listed in
    order of the smallest label in their subtree; Steiner vertices are
    unnamed internal nodes.
    """
    if not len(T):
        raise ValueError("empty tree")
    root = T.root if T.root is not None else T.vertex_of(min(T.labels, key=_label_key))
    parent, _, order = T.rooted(root)
    children: dict[int, list[int]] = {v: [] for v in order}
    for v in order[1:]:
        children[parent[v]].append(v)
    smallest: dict[int, tuple] = {}
    text: dict[int, str] = {}
    for v in reversed(order):
        lab = T.label_of(v)
        keys = [smallest[c] for c in children[v]]
        if lab is not None:
            keys.append(_label_key(lab))
        smallest[v] = min(keys)
        kids = sorted(children[v], key=lambda c: smallest[c])
        name = _quote(lab) if lab is not None else ""
        if kids:
            inner = ",".join(f"{text[c]}:{_fmt_len(T.weight(v, c))}" for c in kids)
            text[v] = f"({inner}){name}"
        else:
            text[v] = name
        for c in kids:
            del text[c]
    return text[root] + ";"


def _tokenize(s: str):
    i, n = 0, len(s)
    while i < n:
        ch = s[i]
        if ch.isspace():
            i += 1
        elif ch == "[":
            j = s.find("]", i)
            if j < 0:
                raise ValueError("unterminated comment")
            i = j + 1
        elif ch in "(),:;":
            yield ch
            i += 1
        elif ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise ValueError("unterminated quoted label")
                if s[j] == "'":
                    if j + 1 < n and s[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(s[j])
                j += 1
            yield ("name", "".join(buf))
            i = j + 1
        else:
            j = i
            while j < n and s[j] not in "(),:;[" and not s[j].isspace():
                j += 1
            yield ("name", s[i:j])
            i = j


def parse_newick(text: str, eta: float = 0.0) -> WeightedTree:
    """Parse Newick text into a ``WeightedTree`` (labels become strings).

    Every branch needs a length. Zero-length branches are contracted.
    """
    toks = list(_tokenize(text.strip()))
    if not toks or toks[-1] != ";":
        raise ValueError("newick text must end with ';'")
    edges = []
    names: dict[int, str | None] = {}
    edge_of: dict[int, list] = {}
    counter = [0]

    def new():
        counter[0] += 1
        names[counter[0]] = None
        return counter[0]

    root = new()
    stack: list[int] = []
    cur = root   # node whose children are being read
    last = root  # node that a following name or length belongs to
    i = 0
    while i < len(toks) - 1:
        t = toks[i]
        if t == "(":
            child = new()
            edges.append([cur, child, None])
            stack.append(cur)
            cur = last = child
        elif t == ",":
            if not stack:
                raise ValueError("',' outside parentheses")
            child = new()
            edges.append([stack[-1], child, None])
            cur = last = child
        elif t == ")":
            if not stack:
                raise ValueError("unbalanced parentheses")
            cur = last = stack.pop()
        elif t == ":":
            i += 1
            tok = toks[i] if i < len(toks) else None
            if not isinstance(tok, tuple):
                raise ValueError("missing branch length")
            if last == root:
                raise ValueError("branch length on the root")
            edge_of[last][2] = float(tok[1])
        elif isinstance(t, tuple):
            if names[last] is not None:
                raise ValueError(f"two names for one node: {names[last]!r}, {t[1]!r}")
            names[last] = t[1] if t[1] != "" else None
        else:
            raise ValueError(f"unexpected token {t!r}")
        if edges and edges[-1][1] not in edge_of:
            edge_of[edges[-1][1]] = edges[-1]
        i += 1
    if stack:
        raise ValueError("unbalanced parentheses")
    for e in edges:
        if e[2] is None:
            raise ValueError("every branch needs a length")
    steiner = [v for v, nm in names.items() if nm is None]
    key = {v: (nm if nm is not None else ("__steiner__", v)) for v, nm in names.items()}
    if len(names) == 1:
        if names[root] is None:
            raise ValueError("tree without labels")
        return WeightedTree.single(names[root])
    seen = [nm for nm in names.values() if nm is not None]
    if len(seen) != len(set(seen)):
        raise ValueError("duplicate labels")
    T = WeightedTree.from_edges(
        [(key[a], key[b], w) for a, b, w in edges],
        steiner=[key[v] for v in steiner], eta=eta)
    T._cleanup()
    return T
