"""Per-pathology score distributions (quartiles by linear interpolation)."""

from __future__ import annotations

from typing import Any, Iterable, Sequence

import numpy as np


def summarize(values: Sequence[float]) -> dict[str, float]:
    v = np.asarray(values, dtype=np.float64)
    q1, q2, q3 = np.percentile(v, [25, 50, 75], method="linear")
    return {
        "n": int(v.size), "mean": float(v.mean()), "q1": float(q1), "median": float(q2), "q3": float(q3),
        "min": float(v.min()), "max": float(v.max()),
    }


def per_pathology_stats(records: Iterable[Any], kind: str = "real",
                        metric: str = "ms_ssim") -> dict[str, dict[str, float]]:
    """Distribution of one aggregate score per pathology tag.

    ``records`` are protocol records (``pathologies`` plus nested ``real`` and
    ``false`` study records). ``n_occurrences`` counts every record carrying
    the tag, scored or not; the distribution uses the scored ones.
    """
    values: dict[str, list[float]] = {}
    occurrences: dict[str, int] = {}
    for rec in records:
        if hasattr(rec, "to_dict"):
            rec = rec.to_dict()
        tags = rec.get("pathologies") or []
        inner = rec.get(kind) or {}
        agg = (inner.get("reliability") or {}).get("aggregate") or {}
        score = agg.get(metric)
        for tag in tags:
            occurrences[tag] = occurrences.get(tag, 0) + 1
            if score is not None:
                values.setdefault(tag, []).append(float(score))
    out = {}
    for tag in sorted(values):
        out[tag] = summarize(values[tag])
        out[tag]["n_occurrences"] = occurrences[tag]
    return out
