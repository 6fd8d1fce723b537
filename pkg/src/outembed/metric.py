"""Finite metrics stored as distance matrices, plus the pointwise conditions
(triangle, three-point, four-point) that every embedding algorithm tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Hashable, Iterable, Sequence

import numpy as np

Label = Hashable


@dataclass(frozen=True)
class ToleranceConfig:
    """Comparison slack for floating point inputs.

    The effective tolerance of a matrix is ``max(abs_tol, rel_tol * diam)``.
    """

    abs_tol: float = 1e-9
    rel_tol: float = 1e-12

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be nonnegative")

    def eta(self, diam: float) -> float:
        return max(self.abs_tol, self.rel_tol * diam)


DEFAULT_TOL = ToleranceConfig()


def _tril_size(n: int) -> int:
    return n * (n - 1) // 2


class DistanceMatrix:
    """Symmetric matrix of pairwise distances between labelled points.

    Only the strict lower triangle is stored, row-major: entry ``(i, j)`` with
    ``i > j`` lives at ``i*(i-1)//2 + j``. Instances are immutable.

    Parameters
    ----------
    dist : array_like
        Flat lower-triangular distances, length ``n*(n-1)/2``.
    labels : sequence, optional
        Point identifiers; defaults to ``0..n-1``.
    """

    __slots__ = ("labels", "dist", "n", "_square", "_index", "_diam")

    def __init__(self, dist, labels: Sequence[Label] | None = None):
        dist = np.array(dist, dtype=np.float64).ravel()
        m = dist.size
        n = int(round((1 + np.sqrt(1 + 8 * m)) / 2)) if m else (len(labels) if labels is not None else 1)
        if _tril_size(n) != m:
            raise ValueError(f"flat distance array of length {m} is not triangular")
        if labels is None:
            labels = tuple(range(n))
        labels = tuple(labels)
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels for {n} points")
        if len(set(labels)) != n:
            raise ValueError("duplicate labels")
        if n == 0:
            raise ValueError("empty distance matrix")
        if not np.all(np.isfinite(dist)):
            raise ValueError("non-finite distance")
        if np.any(dist <= 0):
            bad = int(np.argmin(dist))
            i = int((1 + np.sqrt(1 + 8 * bad)) // 2)
            j = bad - _tril_size(i)
            raise ValueError(
                f"distance between distinct points {labels[i]!r} and {labels[j]!r} "
                f"is {dist[bad]!r}; must be positive"
            )
        dist.setflags(write=False)
        self.dist = dist
        self.labels = labels
        self.n = n
        self._square = None
        self._index = None
        self._diam = None

    @classmethod
    def from_square(cls, D, labels: Sequence[Label] | None = None,
                    tol: ToleranceConfig = DEFAULT_TOL) -> "DistanceMatrix":
        """Build from a full square matrix.

        Entries ``D[i, j]`` and ``D[j, i]`` differing by more than the
        tolerance raise ``ValueError``; closer pairs are averaged.
        """
        D = np.asarray(D, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {D.shape}")
        n = D.shape[0]
        if n and not np.all(np.isfinite(D)):
            raise ValueError("non-finite distance")
        eta = tol.eta(float(np.max(np.abs(D))) if n else 0.0)
        if n and np.max(np.abs(np.diag(D))) > eta:
            raise ValueError("nonzero diagonal")
        asym = np.abs(D - D.T)
        if n and asym.max() > eta:
            i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
            raise ValueError(f"asymmetric entries at ({i}, {j}): {float(D[i, j])!r} vs {float(D[j, i])!r}")
        rows, cols = np.tril_indices(n, -1)
        flat = 0.5 * (D[rows, cols] + D[cols, rows])
        return cls(flat, labels if labels is not None else tuple(range(n)))

    @classmethod
    def from_points(cls, X, labels: Sequence[Label] | None = None) -> "DistanceMatrix":
        """Euclidean distances between the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        diff = X[:, None, :] - X[None, :, :]
        D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        rows, cols = np.tril_indices(X.shape[0], -1)
        return cls(D[rows, cols], labels)

    def square(self) -> np.ndarray:
        """Full ``n x n`` matrix (cached, read-only)."""
        if self._square is None:
            S = np.zeros((self.n, self.n))
            rows, cols = np.tril_indices(self.n, -1)
            S[rows, cols] = self.dist
            S[cols, rows] = self.dist
            S.setflags(write=False)
            self._square = S
        return self._square

    def index(self, label: Label) -> int:
        if self._index is None:
            self._index = {lab: i for i, lab in enumerate(self.labels)}
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown label {label!r}") from None

    def __getitem__(self, ij) -> float:
        i, j = ij
        if i == j:
            return 0.0
        if i < j:
            i, j = j, i
        return float(self.dist[_tril_size(i) + j])

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.dist, other.dist)

    def __hash__(self):
        return hash((self.labels, self.dist.tobytes()))

    def __repr__(self) -> str:
        return f"DistanceMatrix(n={self.n}, diam={self.diameter():.6g})"

    def diameter(self) -> float:
        if self._diam is None:
            self._diam = float(self.dist.max()) if self.dist.size else 0.0
        return self._diam

    def eta(self, tol: ToleranceConfig = DEFAULT_TOL) -> float:
        return tol.eta(self.diameter())


def diameter(M: DistanceMatrix) -> float:
    """Largest pairwise distance; 0 for a single point."""
    return M.diameter()


@dataclass
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)
    eta: float = 0.0
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "eta": self.eta,
            "violations": [list(v) for v in self.violations],
            "truncated": self.truncated,
        }


def validate_metric(M: DistanceMatrix, tol: ToleranceConfig = DEFAULT_TOL,
                    max_report: int = 100) -> ValidationReport:
    """Check the triangle inequality on every triple.

    Symmetry and positivity hold by construction of ``DistanceMatrix``. A
    violation ``(x, y, z)`` means ``rho(x, z) > rho(x, y) + rho(y, z) + eta``.
    """
    D = M.square()
    eta = M.eta(tol)
    violations = []
    total = 0
    for y in range(M.n):
        # bad[x, z]: the path through y is shorter than the direct edge
        bad = D > D[:, y][:, None] + D[y, :][None, :] + eta
        if not bad.any():
            continue
        xs, zs = np.nonzero(np.triu(bad))
        total += len(xs)
        for x, z in zip(xs, zs):
            if len(violations) >= max_report:
                break
            violations.append((M.labels[x], M.labels[y], M.labels[z]))
    return ValidationReport(ok=total == 0, violations=violations, eta=eta,
                            truncated=total > len(violations))


def ultrametric_triple_ok(M: DistanceMatrix, i: int, j: int, k: int, slack: float = 0.0,
                          tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """Three-point condition, relaxed by ``slack``, for indices ``i, j, k``.

    Holds iff every side is at most the larger of the other two plus
    ``slack + eta``; checking the longest side is enough.
    """
    a, b, c = sorted((M[i, j], M[i, k], M[j, k]))
    return c <= b + slack + M.eta(tol)


def four_point_ok(M: DistanceMatrix, i: int, j: int, k: int, l: int, slack: float = 0.0,
                  tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """Four-point condition, relaxed by ``slack``, for four indices.

    Of the three pairing sums, the largest may exceed the second largest by
    at most ``slack + eta``.
    """
    s = sorted((M[i, j] + M[k, l], M[i, k] + M[j, l], M[i, l] + M[j, k]))
    return s[2] <= s[1] + slack + M.eta(tol)


def four_point_defect(M: DistanceMatrix, i: int, j: int, k: int, l: int) -> float:
    """Largest pairing sum minus the second largest (0 for tree metrics)."""
    s = sorted((M[i, j] + M[k, l], M[i, k] + M[j, l], M[i, l] + M[j, k]))
    return s[2] - s[1]


def _aligned(M1: DistanceMatrix, M2: DistanceMatrix) -> np.ndarray:
    if set(M1.labels) != set(M2.labels):
        raise ValueError("matrices are over different label sets")
    if M1.labels == M2.labels:
        return M2.square()
    perm = np.array([M2.index(lab) for lab in M1.labels])
    return M2.square()[np.ix_(perm, perm)]


def linf_gap(M1: DistanceMatrix, M2: DistanceMatrix) -> float:
    """Maximum absolute pairwise difference, matching points by label."""
    if M1.n == 1:
        _aligned(M1, M2)
        return 0.0
    return float(np.max(np.abs(M1.square() - _aligned(M1, M2))))


def restrict(M: DistanceMatrix, keep: Iterable[int]) -> DistanceMatrix:
    """Principal submatrix on the index set ``keep``, in original order."""
    idx = sorted(set(int(i) for i in keep))
    if not idx:
        raise ValueError("cannot restrict to an empty set")
    if idx[0] < 0 or idx[-1] >= M.n:
        raise IndexError("index out of range")
    sub = M.square()[np.ix_(idx, idx)]
    rows, cols = np.tril_indices(len(idx), -1)
    return DistanceMatrix(sub[rows, cols], [M.labels[i] for i in idx])


def restrict_labels(M: DistanceMatrix, keep: Iterable[Label]) -> DistanceMatrix:
    return restrict(M, (M.index(lab) for lab in keep))


def all_triples_ok(M: DistanceMatrix, slack: float = 0.0,
                   tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """Exhaustive three-point check (vectorized)."""
    D = M.square()
    eta = M.eta(tol)
    for z in range(M.n):
        # rho(x, y) <= max(rho(x, z), rho(z, y)) + slack
        bound = np.maximum(D[:, z][:, None], D[z, :][None, :]) + slack + eta
        if np.any(D > bound):
            return False
    return True


def all_quads_ok(M: DistanceMatrix, slack: float = 0.0,
                 tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """Exhaustive four-point check (vectorized over the last index)."""
    D = M.square()
    eta = M.eta(tol)
    n = M.n
    for i, j, k in combinations(range(n), 3):
        ls = np.arange(k + 1, n)
        if ls.size == 0:
            continue
        s1 = D[i, j] + D[k, ls]
        s2 = D[i, k] + D[j, ls]
        s3 = D[i, ls] + D[j, k]
        s = np.sort(np.stack([s1, s2, s3]), axis=0)
        if np.any(s[2] > s[1] + slack + eta):
            return False
    return True
