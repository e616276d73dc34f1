"""Detection accuracy plus reliability for one image and one report.

The report is grounded on the original image, a new image is generated
from the report over the original's lung mask, and every grounded box is
carried onto the generated image through the SVC-anchored shift. Each
ROI pair is then compared with MS-SSIM and with chi-square over feature
histograms.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..adapters.base import AdapterRegistry
from ..core import Box, DualScore, GenerationResult, LungMask, RoiScore, Shift, Study
from ..geometry import apply_shift, dice, estimate_svc_shift
from .features import FeatureHistogram, chi2, default_features
from .ssim import DEFAULT_CONFIG, SsimConfig, crop, ms_ssim, roi_window

DEFAULT_TAU_DET = 0.25


@dataclass(frozen=True)
class ScoreConfig:
    ssim: SsimConfig = DEFAULT_CONFIG
    pad: float = 0.05
    best_of_n: int = 1
    seed: int = 0
    tau_det: float = DEFAULT_TAU_DET
    features: Callable[[np.ndarray], FeatureHistogram] = field(default=default_features, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau_det <= 1.0:
            raise ValueError(f"tau_det must lie in [0, 1], got {self.tau_det}")
        if self.best_of_n < 1:
            raise ValueError("best_of_n must be at least 1")
        if self.pad < 0:
            raise ValueError("pad must be non-negative")


def study_seed(study: Study, master_seed: int) -> int:
    """The study's own seed, or one derived from the master seed and its id."""
    if study.seed is not None:
        return int(study.seed)
    digest = hashlib.sha256(f"{master_seed}:{study.study_id}".encode()).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


def selection_score(mask: LungMask, gen_mask: LungMask, p_orig: dict, p_gen: dict) -> float:
    """Mask Dice times agreement of the classifier outputs."""
    labels = sorted(set(p_orig) | set(p_gen), key=str)
    gap = np.mean([abs(p_orig.get(k, 0.0) - p_gen.get(k, 0.0)) for k in labels]) if labels else 0.0
    return dice(mask, gen_mask) * (1.0 - float(gap))


def _generate(image: np.ndarray, report: str, mask: LungMask, seed: int, registry: AdapterRegistry,
              cfg: ScoreConfig) -> GenerationResult:
    if cfg.best_of_n == 1:
        return registry.generate(report, mask, seed)
    p_orig = registry.classify(image)
    best, best_score = None, -np.inf
    for i in range(cfg.best_of_n):
        cand = registry.generate(report, mask, seed + i)
        s = selection_score(mask, registry.segment(cand.image), p_orig, registry.classify(cand.image))
        if s > best_score:
            best, best_score = cand, s
    return best  # type: ignore[return-value]


def paired_windows(box: Box, shape: tuple[int, int], shift: Shift, pad: float,
                   min_side: int) -> Optional[tuple[tuple[int, int, int, int], tuple[int, int, int, int]]]:
    """Equal-size crop windows on the original and generated images.

    ``shift`` carries generated coordinates onto the original, so the
    generated window is the original one moved by its negation (rounded to
    whole pixels). Both are trimmed to the part that stays inside the frame;
    ``None`` when that leaves a side shorter than ``min_side``.
    """
    h, w = shape
    x0, y0, x1, y1 = roi_window(box, shape, pad, min_side)
    dx, dy = -int(round(shift.dx)), -int(round(shift.dy))
    # trim so both windows stay inside the frame
    lo_x, hi_x = max(x0, -dx), min(x1, w - dx)
    lo_y, hi_y = max(y0, -dy), min(y1, h - dy)
    if hi_x - lo_x < min_side or hi_y - lo_y < min_side:
        return None
    return (lo_x, lo_y, hi_x, hi_y), (lo_x + dx, lo_y + dy, hi_x + dx, hi_y + dy)


def dual_score(study: Study, registry: AdapterRegistry, cfg: ScoreConfig = ScoreConfig(),
               report: Optional[str] = None) -> DualScore:
    """Score ``report`` (default: the study's own) against the study image.

    Adapter failures propagate as :class:`~cxrval.adapters.base.AdapterError`.
    """
    text = study.report_text if report is None else report
    image = study.image
    shape = image.shape
    boxes = list(registry.localize(image, text).boxes)
    if not boxes:
        return DualScore.from_rois([], [])

    seed = study_seed(study, cfg.seed)
    mask = registry.segment(image)
    gen = _generate(image, text, mask, seed, registry, cfg)
    shift = estimate_svc_shift(registry.detect(image), registry.detect(gen.image))
    to_gen = Shift(-shift.dx, -shift.dy, shift.anchor_region, shift.fallback_used)

    rois: list[RoiScore] = []
    dropped = 0
    for b in boxes:
        moved, lost = apply_shift([b], to_gen, shape[1], shape[0])
        if lost:
            dropped += 1
            continue
        windows = paired_windows(b, shape, shift, cfg.pad, cfg.ssim.window)
        if windows is None:
            dropped += 1
            continue
        a_roi, g_roi = crop(image, windows[0]), crop(gen.image, windows[1])
        value, scales = ms_ssim(a_roi, g_roi, cfg.ssim, full=True)
        rois.append(RoiScore(
            box=moved[0],
            detection_accuracy=float(b.probability),  # type: ignore[arg-type]
            ms_ssim=float(value),
            chi2=chi2(cfg.features(a_roi), cfg.features(g_roi)),
            source_box=b,
            scales_used=scales,
        ))

    gen_boxes = registry.localize(gen.image, text).boxes
    gen_max = max((float(g.probability) for g in gen_boxes), default=0.0)  # type: ignore[arg-type]
    orig_max = max(float(b.probability) for b in boxes)  # type: ignore[arg-type]
    return DualScore.from_rois(
        rois, boxes,
        generated_max_probability=gen_max,
        interpretable=orig_max >= cfg.tau_det and gen_max >= cfg.tau_det,
        shift=shift,
        dropped_rois=dropped,
    )


class Scenario(str, enum.Enum):
    BOTH_VALID = "BothValid"
    ONLY_RR = "OnlyRR"
    ONLY_FR = "OnlyFR"
    NEITHER = "Neither"

    def __str__(self) -> str:
        return self.value


def is_valid(score: DualScore, tau_det: float = DEFAULT_TAU_DET) -> bool:
    """A localization counts when its best box reaches ``tau_det``."""
    return bool(score.detections) and score.max_probability >= tau_det


def categorize_scenario(rr: DualScore, fr: DualScore, tau_det: float = DEFAULT_TAU_DET) -> Scenario:
    """Four-way split by which of the real and false reports localize validly."""
    a, b = is_valid(rr, tau_det), is_valid(fr, tau_det)
    if a and b:
        return Scenario.BOTH_VALID
    if a:
        return Scenario.ONLY_RR
    if b:
        return Scenario.ONLY_FR
    return Scenario.NEITHER
