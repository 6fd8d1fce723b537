"""Minimum-outlier embedding into ultrametrics (3-approximations).

Both routines remove whole violating triples, so at least one point of
every removed triple belongs to any optimal outlier set.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .metric import DEFAULT_TOL, DistanceMatrix, ToleranceConfig
from .result import OutlierResult, Violation


def scan_triples(M: DistanceMatrix, slack: float = 0.0,
                 tol: ToleranceConfig = DEFAULT_TOL) -> OutlierResult:
    """Remove every triple that violates the three-point condition by more
    than ``slack``, scanning ``i < j < k`` lexicographically and skipping
    triples that touch an already removed point."""
    D = M.square()
    n = M.n
    thr = slack + M.eta(tol)
    alive = np.ones(n, dtype=bool)
    outliers, cert = [], []
    for i in range(n):
        if not alive[i]:
            continue
        for j in range(i + 1, n):
            if not alive[i]:
                break
            if not alive[j]:
                continue
            ks = np.nonzero(alive[j + 1:])[0] + j + 1
            if ks.size == 0:
                continue
            a = D[i, j]
            b = D[i, ks]
            c = D[j, ks]
            hi = np.maximum(np.maximum(b, c), a)
            lo = np.minimum(np.minimum(b, c), a)
            mid = a + b + c - hi - lo
            bad = np.nonzero(hi - mid > thr)[0]
            if bad.size:
                k = int(ks[bad[0]])
                trip = (M.labels[i], M.labels[j], M.labels[k])
                alive[[i, j, k]] = False
                outliers.extend(trip)
                cert.append(Violation("triple", trip, trip, slack))
    kept = [M.labels[i] for i in range(n) if alive[i]]
    return OutlierResult(outliers, cert, kept)


def outliers_ultrametric_cubic(M: DistanceMatrix,
                               tol: ToleranceConfig = DEFAULT_TOL) -> OutlierResult:
    """Exhaustive triple scan, O(n^3)."""
    res = scan_triples(M, 0.0, tol)
    res.stats["algorithm"] = "ultrametric-naive"
    return res


def outliers_ultrametric_fast(M: DistanceMatrix, order: Sequence[int] | None = None,
                              tol: ToleranceConfig = DEFAULT_TOL) -> OutlierResult:
    """Incremental 3-approximation in O(n^2) time.

    Points are inserted in ``order`` (default: input order) into a kept set
    that is always an ultrametric. A new point ``x`` with nearest kept
    neighbour ``x*`` fits iff every kept ``w`` satisfies
    ``rho(x, w) == max(rho(x, x*), rho(x*, w))``; the first ``w`` that fails
    gives the violating triple ``(x, x*, w)``, which is removed whole.
    """
    n = M.n
    order = list(range(n)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the point indices")
    rows = M.square().tolist()
    eta = M.eta(tol)
    labels = M.labels

    kept: list[int] = []
    outliers, cert = [], []
    reads_total = 0
    worst_ratio = 0.0
    for x in order:
        if not kept:
            kept.append(x)
            continue
        rx = rows[x]
        # nearest neighbour, ties to the lowest index
        best = kept[0]
        bd = rx[best]
        for v in kept:
            dv = rx[v]
            if dv < bd or (dv == bd and v < best):
                best, bd = v, dv
        rs = rows[best]
        fail = -1
        for w in kept:
            if w == best:
                continue
            expect = rs[w] if rs[w] > bd else bd
            if abs(rx[w] - expect) > eta:
                fail = w
                break
        reads = len(kept) + (len(kept) if fail < 0 else kept.index(fail) + 1)
        reads_total += reads
        worst_ratio = max(worst_ratio, reads / len(kept))
        if fail < 0:
            kept.append(x)
            continue
        trip = (labels[x], labels[best], labels[fail])
        kept = [v for v in kept if v != best and v != fail]
        outliers.extend(trip)
        cert.append(Violation("triple", trip, trip, 0.0))
    kept_labels = [labels[v] for v in sorted(kept)]
    stats = {
        "algorithm": "ultrametric-fast",
        "distance_reads": reads_total,
        "reads_per_kept_point": worst_ratio,
    }
    return OutlierResult(outliers, cert, kept_labels, stats)
