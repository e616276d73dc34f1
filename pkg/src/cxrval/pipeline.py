"""Per-study scoring records and the order-preserving worker pool."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, Optional, Sequence, TypeVar

from .adapters.base import AdapterError, AdapterRegistry
from .core import Box, DualScore, Study
from .scoring.dual import ScoreConfig, dual_score, is_valid, study_seed

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> list[R]:
    """``[fn(x) for x in items]``, computed on up to ``workers`` threads."""
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _box_record(b: Box) -> dict[str, Any]:
    return {"box": list(b.coords()), "probability": b.probability, "phrase": b.phrase, "label": b.label}


def score_record(score: DualScore, tau_det: float) -> dict[str, Any]:
    """The detection, reliability and validity parts of a per-study record."""
    gen_max = score.generated_max_probability
    return {
        "detection": [_box_record(b) for b in score.detections],
        "reliability": {
            "per_roi": [
                {
                    "box": list(r.box.coords()),
                    "source_box": list(r.source_box.coords()) if r.source_box is not None else None,
                    "label": r.box.label,
                    "detection_accuracy": r.detection_accuracy,
                    "ms_ssim": r.ms_ssim,
                    "chi2": r.chi2,
                    "scales_used": r.scales_used,
                }
                for r in score.per_roi
            ],
            "aggregate": {
                "detection": score.aggregate_detection,
                "ms_ssim": score.aggregate_ms_ssim,
                "chi2": score.aggregate_chi2,
            },
            "dropped_rois": score.dropped_rois,
        },
        "no_localization": score.no_localization,
        "validity": {
            "original": is_valid(score, tau_det),
            "generated": gen_max is not None and gen_max >= tau_det,
            "original_max_probability": score.max_probability if score.detections else None,
            "generated_max_probability": gen_max,
        },
        "shift": None if score.shift is None else {
            "dx": score.shift.dx, "dy": score.shift.dy,
            "anchor_region": score.shift.anchor_region, "fallback_used": score.shift.fallback_used,
        },
    }


def _meta(study: Study, registry: AdapterRegistry, cfg: ScoreConfig, scales: Iterable[int] = ()) -> dict[str, Any]:
    return {"seed": study_seed(study, cfg.seed), "backend_ids": registry.backend_ids(), "scales_used": sorted(set(scales))}


def error_record(study: Study, exc: BaseException, registry: AdapterRegistry, cfg: ScoreConfig,
                 report_kind: str = "real") -> dict[str, Any]:
    return {
        "study_id": study.study_id,
        "status": "error",
        "report_kind": report_kind,
        "error": str(exc),
        "backend_id": getattr(exc, "backend_id", None),
        "scenario": None,
        "meta": _meta(study, registry, cfg),
    }


def score_study(study: Study, registry: AdapterRegistry, cfg: ScoreConfig = ScoreConfig(),
                report: Optional[str] = None, report_kind: str = "real") -> tuple[Optional[DualScore], dict[str, Any]]:
    """Run the dual score plus text and image classification for one study.

    Failures are caught and returned as an error record with no score.
    """
    text = study.report_text if report is None else report
    try:
        score = dual_score(study, registry, cfg, report=text)
        extraction = registry.extract(text)
        probs = registry.classify(study.image)
    except (AdapterError, OSError, ValueError) as exc:
        return None, error_record(study, exc, registry, cfg, report_kind)
    rec: dict[str, Any] = {
        "study_id": study.study_id,
        "status": "ok",
        "report_kind": report_kind,
        "report_text": text,
        "text_pathologies": sorted(p.value for p in extraction.pathologies),
        "image_pathologies": {k.value: float(v) for k, v in probs.items()},
        "scenario": None,
        "meta": _meta(study, registry, cfg, (r.scales_used for r in score.per_roi)),
    }
    rec.update(score_record(score, cfg.tau_det))
    return score, rec


def run_studies(studies: Sequence[Study], registry: AdapterRegistry, cfg: ScoreConfig = ScoreConfig(),
                workers: int = 1) -> list[dict[str, Any]]:
    """One record per study, in input order regardless of worker count."""
    registry.require_all()
    return ordered_map(lambda s: score_study(s, registry, cfg)[1], list(studies), workers)
