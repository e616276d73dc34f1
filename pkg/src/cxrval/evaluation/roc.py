"""ROC sweep over observed scores and Youden-optimal thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DegenerateRocError(ValueError):
    pass


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float


@dataclass(frozen=True)
class RocCurve:
    """Points sorted by ascending threshold.

    The first point is ``(1, 1)`` at the lowest observed score and the last is
    ``(0, 0)`` at an infinite threshold.
    """

    points: tuple[RocPoint, ...]
    auc: float

    def to_rows(self) -> list[dict[str, float]]:
        return [{"threshold": p.threshold, "tpr": p.tpr, "fpr": p.fpr} for p in self.points]


@dataclass(frozen=True)
class CalibrationResult:
    metric_name: str
    threshold: float
    tpr_at: float
    fpr_at: float
    j: float
    auc: float = float("nan")
    n_pos: int = 0
    n_neg: int = 0

    def to_dict(self) -> dict[str, object]:
        return {
            "metric_name": self.metric_name, "threshold": self.threshold, "tpr_at": self.tpr_at,
            "fpr_at": self.fpr_at, "j": self.j, "auc": self.auc, "n_pos": self.n_pos, "n_neg": self.n_neg,
        }


def roc(scores: Sequence[float] | Iterable[tuple[float, int]], labels: Sequence[int] | None = None) -> RocCurve:
    """Sweep every unique score as a threshold (positive when score >= t).

    Accepts either ``roc(pairs)`` with ``(score, label)`` tuples or
    ``roc(scores, labels)``.
    """
    if labels is None:
        pairs = list(scores)  # type: ignore[arg-type]
        s = np.array([p[0] for p in pairs], dtype=np.float64)
        y = np.array([p[1] for p in pairs])
    else:
        s = np.asarray(scores, dtype=np.float64)
        y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    pos = y == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateRocError("degenerate ROC: both labels must be present")

    order = np.argsort(-s, kind="mergesort")
    s_sorted, pos_sorted = s[order], pos[order]
    tp = np.cumsum(pos_sorted)
    fp = np.cumsum(~pos_sorted)
    # keep the last index of each run of equal scores
    last = np.r_[np.nonzero(np.diff(s_sorted))[0], s_sorted.size - 1]
    tpr = np.r_[0.0, tp[last] / n_pos]
    fpr = np.r_[0.0, fp[last] / n_neg]
    thr = np.r_[math.inf, s_sorted[last]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1])) / 2.0)
    pts = tuple(RocPoint(float(t), float(a), float(b)) for t, a, b in zip(thr[::-1], tpr[::-1], fpr[::-1]))
    return RocCurve(pts, auc)


def youden(curve: RocCurve, metric_name: str = "score") -> CalibrationResult:
    """Point maximizing tpr - fpr over observed thresholds.

    Ties go to the lower fpr, then the lower threshold.
    """
    finite = [p for p in curve.points if math.isfinite(p.threshold)]
    best = min(finite, key=lambda p: (-(p.tpr - p.fpr), p.fpr, p.threshold))
    return CalibrationResult(metric_name, best.threshold, best.tpr, best.fpr, best.tpr - best.fpr, curve.auc)


def calibrate(scores: Sequence[float], labels: Sequence[int], metric_name: str) -> tuple[CalibrationResult, RocCurve]:
    curve = roc(scores, labels)
    res = youden(curve, metric_name)
    y = np.asarray(labels)
    return (
        CalibrationResult(res.metric_name, res.threshold, res.tpr_at, res.fpr_at, res.j, res.auc,
                          int((y == 1).sum()), int((y == 0).sum())),
        curve,
    )
