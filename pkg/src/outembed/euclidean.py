"""Outlier embedding into R^d with exact isometry (2-approximation).

For every (d+1)-subset ``Y`` that embeds, each remaining point is either
rejected (``Y + {x}`` does not embed in the dimension of ``Y``) or kept
provisionally; pairs of provisional points that clash with ``Y`` form a
conflict graph whose 2-approximate vertex cover finishes the outlier set.
The smallest outlier set over all ``Y`` wins.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .metric import DistanceMatrix, Label, restrict
from .result import OutlierResult, Violation


@dataclass(frozen=True)
class EmbedTolerance:
    """Eigenvalue thresholds, relative to ``scale**2`` (scale = diameter).

    An eigenvalue below ``-tol_psd * scale**2`` breaks positive
    semidefiniteness; one above ``tol_rank * scale**2`` counts toward the
    rank. ``near`` widens both thresholds to flag borderline decisions.
    """

    tol_psd: float = 1e-8
    tol_rank: float = 1e-8
    near: float = 100.0


DEFAULT_EMBED_TOL = EmbedTolerance()


@dataclass
class EmbeddabilityReport:
    embeddable: bool
    dimension: int | None = None
    coordinates: np.ndarray | None = None
    max_error: float | None = None
    min_eigenvalue: float = 0.0
    warning: str | None = None


def _gram(D: np.ndarray) -> np.ndarray:
    """Gram matrix of points 1..m-1 based at point 0 (``D`` square)."""
    d0 = D[0, 1:] ** 2
    return 0.5 * (d0[:, None] + d0[None, :] - D[1:, 1:] ** 2)


def embedding_report(M: DistanceMatrix, max_dim: int,
                     tol: EmbedTolerance = DEFAULT_EMBED_TOL,
                     scale: float | None = None) -> EmbeddabilityReport:
    """Decide whether ``M`` embeds isometrically in ``R^max_dim``.

    The Gram matrix is based at the first label. ``M`` embeds in some
    Euclidean space iff it is positive semidefinite, and its rank is the
    embedding dimension. Coordinates come from the eigendecomposition and
    are rows in label order, ``dimension`` columns wide.
    """
    if M.n == 1:
        return EmbeddabilityReport(True, 0, np.zeros((1, 0)), 0.0)
    scale = M.diameter() if scale is None else scale
    s2 = scale * scale
    lam, vec = np.linalg.eigh(_gram(M.square()))
    lam_min = float(lam[0])
    psd = lam_min >= -tol.tol_psd * s2
    keep = lam > tol.tol_rank * s2
    dim = int(keep.sum())
    warn = None
    borderline = (np.abs(lam) > tol.tol_rank * s2 / tol.near) & (np.abs(lam) < tol.tol_rank * s2 * tol.near)
    if borderline.any():
        warn = "eigenvalue within a factor {:g} of the rank threshold".format(tol.near)
    if not psd:
        return EmbeddabilityReport(False, None, None, None, lam_min, warn)
    # largest eigenvalues first, so coordinate 1 carries the most spread
    idx = np.nonzero(keep)[0][::-1]
    Y = vec[:, idx] * np.sqrt(lam[idx])
    X = np.vstack([np.zeros((1, dim)), Y])
    diff = X[:, None, :] - X[None, :, :]
    err = float(np.max(np.abs(np.sqrt((diff ** 2).sum(-1)) - M.square())))
    return EmbeddabilityReport(dim <= max_dim, dim, X, err, lam_min, warn)


def _embeddable_batch(D: np.ndarray, sets: np.ndarray, dim: int,
                      tol: EmbedTolerance, scale: float) -> np.ndarray:
    """Row ``r`` of ``sets`` (indices, base first) embeds in ``R^dim``."""
    if sets.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    sub = D[sets[:, :, None], sets[:, None, :]]
    d0 = sub[:, 0, 1:] ** 2
    G = 0.5 * (d0[:, :, None] + d0[:, None, :] - sub[:, 1:, 1:] ** 2)
    lam = np.linalg.eigvalsh(G)
    s2 = scale * scale
    psd = lam[:, 0] >= -tol.tol_psd * s2
    rank = (lam > tol.tol_rank * s2).sum(axis=1)
    return psd & (rank <= dim)


@dataclass
class ConflictGraph:
    nodes: list
    edges: list = field(default_factory=list)

    def __post_init__(self):
        pos = {v: i for i, v in enumerate(self.nodes)}
        if len(pos) != len(self.nodes):
            raise ValueError("duplicate nodes")
        seen = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop at {a!r}")
            if a not in pos or b not in pos:
                raise ValueError(f"edge ({a!r}, {b!r}) has an unknown endpoint")
            key = frozenset((a, b))
            if key in seen:
                raise ValueError(f"duplicate edge ({a!r}, {b!r})")
            seen.add(key)


def vertex_cover_2approx(G: ConflictGraph) -> list:
    """Both endpoints of a greedy maximal matching.

    Edges are scanned in lexicographic order of node positions, so the
    result is deterministic. Returned in node order.
    """
    pos = {v: i for i, v in enumerate(G.nodes)}
    es = sorted(tuple(sorted((pos[a], pos[b]))) for a, b in G.edges)
    used = set()
    for a, b in es:
        if a not in used and b not in used:
            used.update((a, b))
    return [G.nodes[i] for i in sorted(used)]


def _conflicts(D: np.ndarray, Y: Sequence[int], dim: int, others: Sequence[int],
               tol: EmbedTolerance, scale: float):
    Y = list(Y)
    others = np.asarray(others, dtype=int)
    base = np.tile(Y, (len(others), 1))
    ok = _embeddable_batch(D, np.column_stack([base, others]), dim, tol, scale)
    rejected = [int(v) for v in others[~ok]]
    survivors = [int(v) for v in others[ok]]
    edges = []
    if len(survivors) > 1:
        pairs = np.array(list(combinations(survivors, 2)), dtype=int)
        base = np.tile(Y, (len(pairs), 1))
        ok2 = _embeddable_batch(D, np.column_stack([base, pairs]), dim, tol, scale)
        edges = [(int(a), int(b)) for (a, b) in pairs[~ok2]]
    return rejected, survivors, edges


def conflict_graph(M: DistanceMatrix, Y: Sequence[Label], d_prime: int,
                   tol: EmbedTolerance = DEFAULT_EMBED_TOL):
    """Points rejected by the base ``Y`` and the conflict graph on the rest.

    Returns ``(rejected, G)``: ``x`` is rejected when ``Y + {x}`` does not
    embed in ``R^d_prime``; ``G`` joins surviving ``z, z'`` when
    ``Y + {z, z'}`` does not.
    """
    yi = [M.index(lab) for lab in Y]
    others = [i for i in range(M.n) if i not in set(yi)]
    rej, surv, edges = _conflicts(M.square(), yi, d_prime, others, tol, M.diameter())
    lab = M.labels
    G = ConflictGraph([lab[i] for i in surv], [(lab[a], lab[b]) for a, b in edges])
    return [lab[i] for i in rej], G


def _largest_embeddable(M: DistanceMatrix, d: int, tol: EmbedTolerance):
    D, scale = M.square(), M.diameter()
    for size in range(min(M.n, d + 1), 0, -1):
        for S in combinations(range(M.n), size):
            if size == 1 or _embeddable_batch(D, np.array([S]), d, tol, scale)[0]:
                return list(S)
    return [0]


def outliers_euclidean(M: DistanceMatrix, d: int,
                       tol: EmbedTolerance = DEFAULT_EMBED_TOL):
    """Minimum-outlier isometric embedding into ``R^d``, 2-approximate.

    Returns ``(result, coords)`` where ``coords`` is an array with one row
    of ``d`` coordinates per kept label (in ``result.kept`` order).
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    n = M.n
    D = M.square()
    scale = M.diameter()
    lab = M.labels
    best = None
    if n > d + 1:
        for Y in combinations(range(n), d + 1):
            rep_ok = _embeddable_batch(D, np.array([Y]), d, tol, scale)[0]
            if not rep_ok:
                continue
            sub = D[np.ix_(Y, Y)]
            lam = np.linalg.eigvalsh(_gram(sub))
            d_prime = int((lam > tol.tol_rank * scale * scale).sum())
            others = [i for i in range(n) if i not in Y]
            rej, surv, edges = _conflicts(D, Y, d_prime, others, tol, scale)
            cover = vertex_cover_2approx(ConflictGraph(surv, edges))
            out = tuple(sorted(rej + cover))
            key = (len(out), out)
            if best is None or key < best[0]:
                best = (key, Y, d_prime, rej, edges, cover)
                if not out:
                    break
    else:
        if embedding_report(M, d, tol).embeddable:
            best = ((0, ()), tuple(range(n)), None, [], [], [])

    if best is None:
        keep = _largest_embeddable(M, d, tol)
        gone = tuple(lab[i] for i in range(n) if i not in keep)
        warnings.warn("no embeddable anchor set; keeping a largest embeddable subset")
        cert = [Violation("fallback", (), gone, dim=d)] if gone else []
        outliers = list(gone)
        stats = {"algorithm": "euclidean-exact", "fallback": True}
    else:
        (_, out), Y, d_prime, rej, edges, cover = best
        ylab = tuple(lab[i] for i in Y)
        cert = [Violation("embed", ylab + (lab[x],), (lab[x],), dim=d_prime) for x in rej]
        matched = set(cover)
        for a, b in sorted(edges):
            if a in matched and b in matched:
                cert.append(Violation("embed", ylab + (lab[a], lab[b]), (lab[a], lab[b]), dim=d_prime))
                matched -= {a, b}
        outliers = [lab[i] for i in out]
        keep = [i for i in range(n) if i not in set(out)]
        stats = {"algorithm": "euclidean-exact", "anchors": list(ylab), "anchor_dim": d_prime}
    kept = [lab[i] for i in keep]
    rep = embedding_report(restrict(M, keep), d, tol, scale=scale)
    coords = np.zeros((len(kept), d))
    if rep.coordinates is not None:
        k = min(d, rep.coordinates.shape[1])
        coords[:, :k] = rep.coordinates[:, :k]
        stats["max_error"] = rep.max_error
    if rep.warning:
        stats["warning"] = rep.warning
    return OutlierResult(outliers, cert, kept, stats), coords
