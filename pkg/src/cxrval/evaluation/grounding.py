"""Phrase-grounding accuracy: per-class AP with all-point interpolation, and mIoU."""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

import numpy as np

from ..core import Box
from ..geometry import iou, match_detections


def _keys(preds: Mapping[str, Sequence[Box]], gts: Mapping[str, Sequence[Box]]) -> list[str]:
    keys = list(gts)
    keys += [k for k in preds if k not in gts]
    return keys


def average_precision(tp: Sequence[bool], n_gt: int) -> float:
    """All-point interpolated AP for detections already sorted by confidence."""
    if n_gt <= 0:
        raise ValueError("AP needs at least one ground-truth box")
    hits = np.asarray(tp, dtype=bool)
    if hits.size == 0:
        return 0.0
    ctp = np.cumsum(hits)
    recall = ctp / n_gt
    precision = ctp / np.arange(1, hits.size + 1)
    # precision envelope: best precision at any recall at least this high
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.r_[0.0, recall])
    return float(np.sum(steps * envelope))


def grounding_map(preds_by_study: Mapping[str, Sequence[Box]], gts_by_study: Mapping[str, Sequence[Box]],
                  iou_threshold: float = 0.5) -> dict[str, object]:
    """Per-class AP over predictions pooled across studies, and their mean.

    Matching happens inside each study; the pooled ranking orders by
    probability, then study order, then prediction index. Classes without
    ground truth get no AP and do not enter the mean.
    """
    keys = _keys(preds_by_study, gts_by_study)
    n_gt: dict[str, int] = {}
    ranked: dict[str, list[tuple[float, int, int, bool]]] = {}
    for si, sid in enumerate(keys):
        preds = list(preds_by_study.get(sid, ()))
        gts = list(gts_by_study.get(sid, ()))
        for g in gts:
            if g.label is None:
                raise ValueError(f"ground-truth box in {sid!r} has no label")
            n_gt[g.label] = n_gt.get(g.label, 0) + 1
        for pi, gi in match_detections(preds, gts, iou_threshold):
            p = preds[pi]
            if p.label is None:
                raise ValueError(f"prediction in {sid!r} has no label")
            ranked.setdefault(p.label, []).append((-float(p.probability), si, pi, gi is not None))  # type: ignore[arg-type]
    if not n_gt:
        raise ValueError("no ground-truth boxes at all; mAP is undefined")
    per_class = {}
    for label in sorted(n_gt):
        rows = sorted(ranked.get(label, []))
        per_class[label] = average_precision([r[3] for r in rows], n_gt[label])
    return {"per_class_ap": per_class, "map": float(np.mean(list(per_class.values())))}


def _top(preds: Sequence[Box]) -> Optional[Box]:
    best = None
    for p in preds:
        if p.probability is None:
            raise ValueError("predictions need probabilities")
        if best is None or p.probability > best.probability:
            best = p
    return best


def grounding_miou(preds_by_study: Mapping[str, Sequence[Box]], gts_by_study: Mapping[str, Sequence[Box]]) -> float:
    """Mean over studies of the IoU between the top prediction and its GT box.

    The GT box is the first one sharing the prediction's phrase, else the
    first sharing its label, else the study's first GT box. A study with no
    prediction scores 0.
    """
    values = []
    for sid, gts in gts_by_study.items():
        if not gts:
            continue
        top = _top(list(preds_by_study.get(sid, ())))
        if top is None:
            values.append(0.0)
            continue
        gt = next((g for g in gts if top.phrase is not None and g.phrase == top.phrase),
                  next((g for g in gts if g.label == top.label), gts[0]))
        values.append(iou(top, gt))
    if not values:
        raise ValueError("no study carries ground-truth boxes")
    return float(np.mean(values))
