"""Anatomical region association, caption synthesis and anatomy preservation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import Box, PathologyLabel, RegionDetection, Shift
from .geometry import apply_shift, center_distance, estimate_svc_shift, iou

DEFAULT_IOU_FLOOR = 0.05
DEFAULT_BILATERAL_FLOOR = 0.1


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    regions: tuple[str, ...]
    lateral_pairs: tuple[tuple[str, str], ...]
    version: str = "1"
    _twins: dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        names = set(self.regions)
        if len(names) != len(self.regions):
            raise VocabularyError("duplicate region names in vocabulary")
        for left, right in self.lateral_pairs:
            for n in (left, right):
                if n not in names:
                    raise VocabularyError(f"lateral pair names unknown region {n!r}")
            self._twins[left] = right
            self._twins[right] = left

    def twin(self, name: str) -> Optional[str]:
        return self._twins.get(name)

    def __contains__(self, name: object) -> bool:
        return name in self.regions

    def check(self, names: Iterable[str]) -> None:
        for n in names:
            if n not in self.regions:
                raise VocabularyError(f"unknown region name {n!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(
            tuple(d["regions"]),
            tuple((str(a), str(b)) for a, b in d.get("lateral_pairs", [])),
            str(d.get("version", "1")),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@lru_cache(maxsize=1)
def default_vocabulary() -> Vocabulary:
    text = resources.files("cxrval.data").joinpath("regions.json").read_text(encoding="utf-8")
    return Vocabulary.from_dict(json.loads(text))


def associate_regions(
    pbox: Box,
    regions: Sequence[RegionDetection],
    iou_floor: float = DEFAULT_IOU_FLOOR,
    bilateral_floor: float = DEFAULT_BILATERAL_FLOOR,
    vocabulary: Optional[Vocabulary] = None,
) -> list[str]:
    """Name the anatomical region(s) a pathology box belongs to.

    The primary region is the best-overlapping one (ties: nearer center, then
    name). If no region reaches ``iou_floor`` the nearest center wins instead.
    When the primary region has a left/right twin that overlaps the box by at
    least ``bilateral_floor``, the twin is appended.
    """
    if not regions:
        raise ValueError("region list is empty")
    vocab = vocabulary or default_vocabulary()
    vocab.check(r.region_name for r in regions)

    scored = [(iou(pbox, r.box), center_distance(pbox, r.box), r.region_name) for r in regions]
    best = min(scored, key=lambda t: (-t[0], t[1], t[2]))
    if best[0] >= iou_floor and best[0] > 0.0:
        primary = best[2]
    else:
        primary = min(scored, key=lambda t: (t[1], t[2]))[2]

    out = [primary]
    twin = vocab.twin(primary)
    if twin is not None:
        twin_ious = [s[0] for s in scored if s[2] == twin]
        if twin_ious and max(twin_ious) >= bilateral_floor:
            out.append(twin)
    return out


def synthesize_caption(pathology: PathologyLabel | str, regions: Sequence[str]) -> str:
    if not regions:
        raise ValueError("caption needs at least one region")
    label = pathology.value if isinstance(pathology, PathologyLabel) else PathologyLabel.parse(pathology).value
    if len(regions) == 1:
        where = regions[0]
    else:
        where = ", ".join(regions[:-1]) + " and " + regions[-1]
    return f"{label} in {where}"


@dataclass(frozen=True)
class EnrichedAnnotation:
    pathology: PathologyLabel
    box: Box
    regions: tuple[str, ...]
    caption: str

    def as_gt_box(self) -> Box:
        return Box(self.box.x_min, self.box.y_min, self.box.x_max, self.box.y_max,
                   label=self.pathology.value, phrase=self.caption, probability=self.box.probability)


def enrich(
    pathology: PathologyLabel | str,
    pbox: Box,
    regions: Sequence[RegionDetection],
    iou_floor: float = DEFAULT_IOU_FLOOR,
    bilateral_floor: float = DEFAULT_BILATERAL_FLOOR,
    vocabulary: Optional[Vocabulary] = None,
) -> EnrichedAnnotation:
    label = pathology if isinstance(pathology, PathologyLabel) else PathologyLabel.parse(pathology)
    names = associate_regions(pbox, regions, iou_floor, bilateral_floor, vocabulary)
    return EnrichedAnnotation(label, pbox, tuple(names), synthesize_caption(label, names))


@dataclass(frozen=True)
class FidelityResult:
    per_region_iou: dict[str, float]
    miou: float
    shift: Shift
    absent: tuple[str, ...] = ()


def anatomical_fidelity(
    orig_regions: Sequence[RegionDetection],
    gen_regions: Sequence[RegionDetection],
    width: float = float("inf"),
    height: float = float("inf"),
) -> FidelityResult:
    """Register generated-image regions onto the original and score overlap.

    Regions detected in only one image are listed in ``absent`` and left out
    of the mean.
    """
    shift = estimate_svc_shift(orig_regions, gen_regions)
    orig = {r.region_name: r.box for r in orig_regions}
    gen = {r.region_name: r.box for r in gen_regions}
    common = sorted(set(orig) & set(gen))
    if not common:
        raise ValueError("no overlap vocabulary")
    per_region: dict[str, float] = {}
    for name in common:
        moved, dropped = apply_shift([gen[name]], shift, width, height)
        per_region[name] = iou(orig[name], moved[0]) if not dropped else 0.0
    absent = tuple(sorted(set(orig) ^ set(gen)))
    return FidelityResult(per_region, float(np.mean(list(per_region.values()))), shift, absent)


def fidelity_summary(results: Sequence[FidelityResult]) -> dict[str, float]:
    """Pool several image pairs: micro averages over boxes, macro over region names."""
    if not results:
        raise ValueError("no fidelity results to summarize")
    all_ious = [v for r in results for v in r.per_region_iou.values()]
    by_name: dict[str, list[float]] = {}
    for r in results:
        for name, v in r.per_region_iou.items():
            by_name.setdefault(name, []).append(v)
    return {
        "miou_micro": float(np.mean(all_ious)),
        "miou_macro": float(np.mean([np.mean(v) for v in by_name.values()])),
        "n_boxes": float(len(all_ious)),
        "n_regions": float(len(by_name)),
    }
