"""Box overlap metrics, mask overlap, detection matching and SVC registration."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .core import Box, DegenerateBoxError, LungMask, RegionDetection, Shift

SVC = "svc"


def _intersection(a: Box, b: Box) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def iou(a: Box, b: Box) -> float:
    inter = _intersection(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def giou(a: Box, b: Box) -> float:
    """Generalized IoU: IoU minus the empty fraction of the enclosing box."""
    inter = _intersection(a, b)
    union = a.area + b.area - inter
    enclosing = (max(a.x_max, b.x_max) - min(a.x_min, b.x_min)) * (max(a.y_max, b.y_max) - min(a.y_min, b.y_min))
    return inter / union - (enclosing - union) / enclosing


def dice(a: LungMask | np.ndarray, b: LungMask | np.ndarray) -> float:
    pa = a.pixels if isinstance(a, LungMask) else np.asarray(a, dtype=bool)
    pb = b.pixels if isinstance(b, LungMask) else np.asarray(b, dtype=bool)
    if pa.shape != pb.shape:
        raise ValueError(f"mask shapes differ: {pa.shape} vs {pb.shape}")
    total = int(pa.sum()) + int(pb.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(pa, pb).sum()) / total


def center_distance(a: Box, b: Box) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def clamp_to_image(b: Box, width: float, height: float) -> Box:
    """Clip a box to ``[0, width] x [0, height]``.

    Raises :class:`DegenerateBoxError` when nothing of the box is left.
    """
    x0, y0 = max(b.x_min, 0.0), max(b.y_min, 0.0)
    x1, y1 = min(b.x_max, float(width)), min(b.y_max, float(height))
    if not (x0 < x1 and y0 < y1):
        raise DegenerateBoxError(f"box {b.coords()} lies outside the {width}x{height} image")
    if (x0, y0, x1, y1) == b.coords():
        return b
    return b.with_coords(x0, y0, x1, y1)


def _by_name(dets: Sequence[RegionDetection]) -> dict[str, RegionDetection]:
    out: dict[str, RegionDetection] = {}
    for d in dets:
        # keep the most confident detection per region name
        if d.region_name not in out or d.confidence > out[d.region_name].confidence:
            out[d.region_name] = d
    return out


def estimate_svc_shift(orig: Sequence[RegionDetection], gen: Sequence[RegionDetection]) -> Shift:
    """Translation that carries generated-image boxes onto the original image.

    Anchors on the SVC; without it, on the shared region with the highest
    confidence product (ties by name); with nothing shared, returns zero.
    """
    o, g = _by_name(orig), _by_name(gen)
    anchor: Optional[str] = None
    fallback = False
    if SVC in o and SVC in g:
        anchor = SVC
    else:
        fallback = True
        common = sorted(set(o) & set(g))
        if common:
            # max() keeps the first maximum, so sorted order breaks ties by name
            anchor = max(common, key=lambda n: o[n].confidence * g[n].confidence)
    if anchor is None:
        return Shift(0.0, 0.0, anchor_region="", fallback_used=True)
    (ox, oy), (gx, gy) = o[anchor].box.center, g[anchor].box.center
    return Shift(ox - gx, oy - gy, anchor_region=anchor, fallback_used=fallback)


def apply_shift(boxes: Sequence[Box], s: Shift, width: float, height: float) -> tuple[list[Box], int]:
    """Translate every box by the shift and clamp it to the image.

    Returns the surviving boxes and the number dropped because clamping left
    them without area.
    """
    out: list[Box] = []
    dropped = 0
    for b in boxes:
        try:
            out.append(clamp_to_image(b.translated(s.dx, s.dy), width, height))
        except DegenerateBoxError:
            dropped += 1
    return out, dropped


def match_detections(
    preds: Sequence[Box], gts: Sequence[Box], iou_threshold: float = 0.5
) -> list[tuple[int, Optional[int]]]:
    """Greedy same-label matching of predictions to ground truth.

    Predictions are visited by descending probability (ties: ascending index);
    each takes the unmatched same-label GT with the highest IoU (ties: lowest
    GT index) if that IoU reaches ``iou_threshold``. The result is listed in
    visiting order.
    """
    for i, p in enumerate(preds):
        if p.probability is None:
            raise ValueError(f"prediction {i} has no probability")
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].probability, i))  # type: ignore[operator]
    taken = [False] * len(gts)
    result: list[tuple[int, Optional[int]]] = []
    for i in order:
        best, best_iou = None, -1.0
        for j, g in enumerate(gts):
            if taken[j] or g.label != preds[i].label:
                continue
            v = iou(preds[i], g)
            if v > best_iou:
                best, best_iou = j, v
        if best is not None and best_iou >= iou_threshold:
            taken[best] = True
            result.append((i, best))
        else:
            result.append((i, None))
    return result
