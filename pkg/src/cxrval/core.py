"""Domain value objects shared by every stage of the validation pipeline.

All types are immutable after construction. Pixel coordinates use the
corner form ``(x_min, y_min, x_max, y_max)`` with the origin at the top-left
corner and ``y`` growing downward.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np


class PathologyLabel(str, enum.Enum):
    """The 14 canonical thoracic finding classes."""

    ATELECTASIS = "Atelectasis"
    CARDIOMEGALY = "Cardiomegaly"
    CONSOLIDATION = "Consolidation"
    EDEMA = "Edema"
    ENLARGED_CARDIOMEDIASTINUM = "Enlarged Cardiomediastinum"
    FRACTURE = "Fracture"
    LUNG_LESION = "Lung Lesion"
    LUNG_OPACITY = "Lung Opacity"
    NO_FINDING = "No Finding"
    PLEURAL_EFFUSION = "Pleural Effusion"
    PLEURAL_OTHER = "Pleural Other"
    PNEUMONIA = "Pneumonia"
    PNEUMOTHORAX = "Pneumothorax"
    SUPPORT_DEVICES = "Support Devices"

    @classmethod
    def parse(cls, text: str) -> "PathologyLabel":
        key = " ".join(str(text).split()).casefold()
        for member in cls:
            if member.value.casefold() == key:
                return member
        raise ValueError(f"unknown pathology label: {text!r}")

    def __str__(self) -> str:
        return self.value


class View(str, enum.Enum):
    PA = "PA"
    AP = "AP"


class DegenerateBoxError(ValueError):
    """Raised when an operation would produce a box with no area."""


def _check_probability(p: Optional[float]) -> None:
    if p is None:
        return
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise ValueError(f"probability must lie in [0, 1], got {p}")


@dataclass(frozen=True)
class Box:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    label: Optional[str] = None
    phrase: Optional[str] = None
    probability: Optional[float] = None

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DegenerateBoxError(f"degenerate box {coords}")
        _check_probability(self.probability)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def coords(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def with_coords(self, x_min: float, y_min: float, x_max: float, y_max: float) -> "Box":
        return Box(x_min, y_min, x_max, y_max, self.label, self.phrase, self.probability)

    def translated(self, dx: float, dy: float) -> "Box":
        return self.with_coords(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "x_min": float(self.x_min),
            "y_min": float(self.y_min),
            "x_max": float(self.x_max),
            "y_max": float(self.y_max),
        }
        if self.label is not None:
            out["label"] = self.label
        if self.phrase is not None:
            out["phrase"] = self.phrase
        if self.probability is not None:
            out["probability"] = float(self.probability)
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Box":
        return cls(
            float(d["x_min"]),
            float(d["y_min"]),
            float(d["x_max"]),
            float(d["y_max"]),
            label=d.get("label"),
            phrase=d.get("phrase"),
            probability=None if d.get("probability") is None else float(d["probability"]),
        )


@dataclass(frozen=True)
class LungMask:
    """Binary lung mask; ``warning`` is set when the segmenter found nothing."""

    pixels: np.ndarray = field(compare=False)
    warning: Optional[str] = None

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"mask must be a non-empty 2-D array, got shape {px.shape}")
        if px.dtype != bool:
            if not np.isin(px, (0, 1)).all():
                raise ValueError("mask values must be strictly binary")
            px = px.astype(bool)
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape  # type: ignore[return-value]

    @property
    def is_empty(self) -> bool:
        return not bool(self.pixels.any())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LungMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class GenerationResult:
    image: np.ndarray = field(compare=False)
    prompt_used: str
    mask_used: LungMask = field(compare=False)
    backend_id: str
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if np.asarray(self.image).shape != self.mask_used.shape:
            raise ValueError(
                f"generated image shape {np.asarray(self.image).shape} != mask shape {self.mask_used.shape}"
            )


@dataclass(frozen=True)
class RegionDetection:
    region_name: str
    box: Box
    confidence: float = 1.0

    def __post_init__(self) -> None:
        _check_probability(self.confidence)

    def to_dict(self) -> dict[str, Any]:
        return {"region_name": self.region_name, "box": self.box.to_dict(), "confidence": float(self.confidence)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RegionDetection":
        return cls(d["region_name"], Box.from_dict(d["box"]), float(d.get("confidence", 1.0)))


@dataclass(frozen=True)
class Shift:
    dx: float
    dy: float
    anchor_region: str = "svc"
    fallback_used: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise ValueError("shift components must be finite")


def as_raster(image: Any) -> np.ndarray:
    """Validate a grayscale raster and return it as an ndarray."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale raster, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("raster must have positive width and height")
    return arr


@dataclass(frozen=True)
class Study:
    """One chest X-ray with its report and optional ground truth.

    Pixels are either supplied directly (``pixels``) or loaded lazily from
    ``image_path`` on first access of :attr:`image`. ``seed`` is an optional
    per-study generator seed (phantom manifests carry one).
    """

    study_id: str
    report_text: str
    view: View = View.PA
    image_path: Optional[str] = None
    gt_boxes: Optional[tuple[Box, ...]] = None
    gt_pathologies: Optional[frozenset[PathologyLabel]] = None
    seed: Optional[int] = None
    pixels: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    loader: Optional[Callable[[str], np.ndarray]] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.study_id:
            raise ValueError("study_id must be non-empty")
        if not isinstance(self.view, View):
            object.__setattr__(self, "view", View(self.view))
        if self.gt_boxes is not None and not isinstance(self.gt_boxes, tuple):
            object.__setattr__(self, "gt_boxes", tuple(self.gt_boxes))
        if self.gt_pathologies is not None and not isinstance(self.gt_pathologies, frozenset):
            object.__setattr__(
                self,
                "gt_pathologies",
                frozenset(p if isinstance(p, PathologyLabel) else PathologyLabel.parse(p) for p in self.gt_pathologies),
            )
        if self.pixels is None and self.image_path is None:
            raise ValueError(f"study {self.study_id!r} has neither pixels nor image_path")
        if self.pixels is not None:
            px = as_raster(self.pixels).copy()
            px.setflags(write=False)
            object.__setattr__(self, "pixels", px)

    @property
    def image(self) -> np.ndarray:
        if self.pixels is not None:
            return self.pixels
        cached = self.__dict__.get("_image_cache")
        if cached is None:
            from .io import load_image

            path = Path(self.image_path)  # type: ignore[arg-type]
            if not path.exists():
                raise FileNotFoundError(f"image file not found: {path}")
            cached = (self.loader or load_image)(str(path))
            cached = as_raster(cached)
            cached.setflags(write=False)
            self.__dict__["_image_cache"] = cached
        return cached

    @property
    def is_no_finding(self) -> bool:
        return bool(self.gt_pathologies) and PathologyLabel.NO_FINDING in self.gt_pathologies  # type: ignore[operator]


@dataclass(frozen=True)
class RoiScore:
    box: Box
    detection_accuracy: float
    ms_ssim: float
    chi2: float
    source_box: Optional[Box] = None
    scales_used: int = 0


@dataclass(frozen=True)
class DualScore:
    """Detection accuracy and reliability scores for one (image, report) pair.

    Aggregates are ``None`` when nothing was localized.
    """

    per_roi: tuple[RoiScore, ...]
    aggregate_detection: Optional[float]
    aggregate_ms_ssim: Optional[float]
    aggregate_chi2: Optional[float]
    detections: tuple[Box, ...] = ()
    no_localization: bool = False
    generated_max_probability: Optional[float] = None
    interpretable: Optional[bool] = None
    shift: Optional[Shift] = None
    dropped_rois: int = 0

    @classmethod
    def from_rois(cls, rois: list[RoiScore], detections: list[Box], **kwargs: Any) -> "DualScore":
        if not rois:
            return cls((), None, None, None, detections=tuple(detections), no_localization=not detections, **kwargs)
        return cls(
            tuple(rois),
            float(np.mean([r.detection_accuracy for r in rois])),
            float(np.mean([r.ms_ssim for r in rois])),
            float(np.mean([r.chi2 for r in rois])),
            detections=tuple(detections),
            **kwargs,
        )

    @property
    def max_probability(self) -> float:
        probs = [b.probability for b in self.detections if b.probability is not None]
        return max(probs) if probs else 0.0
