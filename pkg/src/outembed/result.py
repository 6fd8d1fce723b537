"""Outlier sets together with the evidence that justifies each removal."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .metric import Label


@dataclass(frozen=True)
class Violation:
    """One certificate entry.

    ``kind`` names the condition that failed on ``points``:

    ``"triple"``
        three-point condition with additive ``slack``
    ``"quad"``
        four-point condition with additive ``slack``
    ``"embed"``
        ``points`` is not embeddable in R^``dim``
    ``"budget"``
        a placed pair whose distance error exceeds ``slack``
        (``detail`` carries the two coordinates)
    ``"unplaced"``
        no grid point for ``removed[0]`` within ``slack`` of the anchors
    ``"fallback"``
        no embeddable anchor set exists; removal is not backed by a
        checkable violation

    ``removed`` lists the points that were dropped because of this entry.
    """

    kind: str
    points: tuple
    removed: tuple
    slack: float = 0.0
    dim: int | None = None
    detail: dict | None = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "kind": self.kind,
            "points": list(self.points),
            "removed": list(self.removed),
            "slack": self.slack,
        }
        if self.dim is not None:
            out["dim"] = self.dim
        if self.detail is not None:
            out["detail"] = self.detail
        return out


@dataclass
class OutlierResult:
    outliers: list
    certificate: list = field(default_factory=list)
    kept: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.outliers)

    @property
    def k(self) -> int:
        return len(self.outliers)

    def partition_ok(self, labels) -> bool:
        """Outliers and kept split ``labels``, and every outlier is accounted
        for by exactly the ``removed`` fields of the certificate."""
        out, kept = set(self.outliers), set(self.kept)
        if out & kept or out | kept != set(labels):
            return False
        if len(out) != len(self.outliers) or len(kept) != len(self.kept):
            return False
        removed: list[Label] = [lab for v in self.certificate for lab in v.removed]
        return len(removed) == len(set(removed)) and set(removed) == out

    def to_dict(self) -> dict:
        return {
            "outliers": list(self.outliers),
            "kept": list(self.kept),
            "certificate": [v.to_dict() for v in self.certificate],
        }
