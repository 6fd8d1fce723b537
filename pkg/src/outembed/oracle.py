"""Brute-force ground truth for small instances."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .euclidean import DEFAULT_EMBED_TOL, EmbedTolerance, _embeddable_batch
from .instances import SimpleGraph
from .metric import DEFAULT_TOL, DistanceMatrix, ToleranceConfig
from .result import OutlierResult


class BudgetExceeded(RuntimeError):
    """The instance is larger than the oracle is allowed to search."""


@dataclass(frozen=True)
class OracleBudget:
    max_n: int = 12
    max_subset: int | None = None

    def __post_init__(self):
        if self.max_n > 20:
            raise ValueError("max_n is capped at 20")


def _violating_masks(M: DistanceMatrix, size: int, tol: ToleranceConfig) -> np.ndarray:
    """Bitmasks of every triple (size 3) or 4-tuple (size 4) that violates
    the three-point or four-point condition."""
    D = M.square()
    eta = M.eta(tol)
    masks = []
    for t in combinations(range(M.n), size):
        if size == 3:
            i, j, k = t
            s = sorted((D[i, j], D[i, k], D[j, k]))
        else:
            i, j, k, l = t
            s = sorted((D[i, j] + D[k, l], D[i, k] + D[j, l], D[i, l] + D[j, k]))
        if s[-1] - s[-2] > eta:
            masks.append(sum(1 << v for v in t))
    return np.array(masks, dtype=np.int64)


def exact_min_outliers(M: DistanceMatrix, target: str, budget: OracleBudget = OracleBudget(),
                       d: int | None = None, tol: ToleranceConfig = DEFAULT_TOL,
                       embed_tol: EmbedTolerance = DEFAULT_EMBED_TOL) -> list:
    """Lexicographically least minimum outlier set, by enumeration.

    ``target`` is ``"ultrametric"``, ``"tree"`` or ``"euclidean"`` (with
    ``d``). Subsets are tried by increasing size, lexicographically within
    a size; for the first two targets a subset works iff it meets every
    violating tuple.
    """
    n = M.n
    if n > budget.max_n:
        raise BudgetExceeded(f"{n} points exceeds the oracle limit of {budget.max_n}")
    cap = n if budget.max_subset is None else min(n, budget.max_subset)
    if target in ("ultrametric", "tree"):
        masks = _violating_masks(M, 3 if target == "ultrametric" else 4, tol)
        if masks.size == 0:
            return []
        for size in range(1, cap + 1):
            for S in combinations(range(n), size):
                m = sum(1 << v for v in S)
                if np.all(masks & m):
                    return [M.labels[i] for i in S]
    elif target == "euclidean":
        if d is None or d < 1:
            raise ValueError("euclidean target needs d >= 1")
        D, scale = M.square(), M.diameter()
        for size in range(0, cap + 1):
            keep_size = n - size
            if keep_size <= 1:
                return [M.labels[i] for i in range(size)]
            outs = list(combinations(range(n), size))
            keeps = np.array([[i for i in range(n) if i not in set(S)] for S in outs])
            for lo in range(0, len(outs), 4096):
                ok = _embeddable_batch(D, keeps[lo:lo + 4096], d, embed_tol, scale)
                hit = np.nonzero(ok)[0]
                if hit.size:
                    return [M.labels[i] for i in outs[lo + int(hit[0])]]
    else:
        raise ValueError(f"unknown target {target!r}")
    raise BudgetExceeded(f"no feasible outlier set of size at most {cap}")


def exact_min_vertex_cover(G: SimpleGraph) -> list[int]:
    """Lexicographically least minimum vertex cover.

    Sizes start at the size of a greedy maximal matching (a lower bound);
    within a size, subsets are scanned in lexicographic order.
    """
    if G.n > 20:
        raise BudgetExceeded("vertex cover oracle is limited to 20 vertices")
    if not G.edges:
        return []
    used, lb = set(), 0
    for a, b in G.edges:
        if a not in used and b not in used:
            used.update((a, b))
            lb += 1
    emask = [(1 << a) | (1 << b) for a, b in G.edges]
    for size in range(lb, G.n + 1):
        for S in combinations(range(G.n), size):
            m = sum(1 << v for v in S)
            if all(e & m for e in emask):
                return list(S)
    raise AssertionError("unreachable")


def _check_entry(M: DistanceMatrix, v, tol, embed_tol) -> bool:
    from .bicriteria import GridSpec, _grid_search

    D = M.square()
    eta = M.eta(tol)
    try:
        idx = [M.index(lab) for lab in v.points]
    except KeyError:
        return False
    if not set(v.removed) <= set(v.points) and v.kind != "fallback":
        return False
    if v.kind == "triple":
        if len(set(idx)) != 3:
            return False
        i, j, k = idx
        s = sorted((D[i, j], D[i, k], D[j, k]))
        return s[2] - s[1] > v.slack + eta
    if v.kind == "quad":
        if len(set(idx)) != 4:
            return False
        i, j, k, l = idx
        s = sorted((D[i, j] + D[k, l], D[i, k] + D[j, l], D[i, l] + D[j, k]))
        return s[2] - s[1] > v.slack + eta
    if v.kind == "embed":
        if len(set(idx)) != len(idx) or v.dim is None:
            return False
        return not _embeddable_batch(D, np.array([idx]), v.dim, embed_tol, M.diameter())[0]
    if v.kind == "budget":
        a, b = idx
        p, q = (np.asarray(c) for c in v.detail["coords"])
        return abs(D[a, b] - float(np.linalg.norm(p - q))) > v.slack
    if v.kind == "unplaced":
        det = v.detail
        grid = GridSpec(det["tau"], det["half_width"])
        anchors = np.asarray(det["anchor_coords"], dtype=float)
        x = idx[-1]
        targets = D[x, idx[:-1]]
        return _grid_search(anchors, targets, v.slack, grid, anchors.shape[1]) is None
    if v.kind == "fallback":
        return True
    return False


def verify_certificate(M: DistanceMatrix, r: OutlierResult, tol: ToleranceConfig = DEFAULT_TOL,
                       embed_tol: EmbedTolerance = DEFAULT_EMBED_TOL) -> bool:
    """Re-check every certificate entry against ``M`` and the partition of
    labels into outliers and kept points."""
    if not r.partition_ok(M.labels):
        return False
    return all(_check_entry(M, v, tol, embed_tol) for v in r.certificate)
