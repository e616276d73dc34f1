"""Layout-driven backends for phantom images.

They read a phantom's layout back from its pixels (body outline for the
translation, template least squares for the findings), so they are pure,
thread-safe and fast enough to run the whole pipeline at desk scale.
"""

from __future__ import annotations

import numpy as np

from .. import phantom as ph
from ..anatomy import default_vocabulary
from ..core import Box, GenerationResult, LungMask, PathologyLabel, RegionDetection
from .base import (
    AdapterRegistry,
    AnatomyDetector,
    Generator,
    Grounder,
    GroundingRequest,
    GroundingResponse,
    PathologyClassifier,
    Segmenter,
)
from .text import RuleTextExtractor

FLOOR = 0.05
SPAN = 0.9


def loading_to_probability(c: float) -> float:
    return FLOOR + SPAN * float(np.clip(c, 0.0, 1.0))


class PhantomGrounder(Grounder):
    """One scored box per finding the prompt names, at its layout anchor."""

    backend_id = "phantom-grounder"
    thread_safe = True

    def localize(self, req: GroundingRequest) -> GroundingResponse:
        loadings = ph.decompose(req.image)
        if loadings is None:
            return GroundingResponse(())
        size = req.image.shape[0]
        offset = ph.detect_offset(req.image)
        boxes = []
        for f in ph.findings_from_report(req.prompt):
            t = ph.template_for(size, offset, f)  # type: ignore[arg-type]
            b = t.box
            boxes.append(Box(b.x_min, b.y_min, b.x_max, b.y_max, label=f.label.value, phrase=b.phrase,
                             probability=loading_to_probability(loadings[f])))
        return GroundingResponse(tuple(boxes))


class PhantomGenerator(Generator):
    """Re-renders the findings named in the prompt over the mask's layout."""

    backend_id = "phantom-generator"
    thread_safe = True

    def generate(self, prompt: str, mask: LungMask, seed: int) -> GenerationResult:
        offset = ph.offset_from_lung_mask(mask.pixels)
        if offset is None:
            raise ValueError("lung mask is empty; nothing to condition on")
        image = ph.render(ph.findings_from_report(prompt), mask.shape[0], offset, seed)
        return GenerationResult(image, prompt, mask, self.backend_id, seed)


class PhantomSegmenter(Segmenter):
    backend_id = "phantom-segmenter"
    thread_safe = True

    def segment(self, image: np.ndarray) -> LungMask:
        offset = ph.detect_offset(image)
        if offset is None:
            return LungMask(np.zeros(np.shape(image), dtype=bool), warning="no lung field found")
        return LungMask(ph.lung_mask(np.shape(image)[0], offset))


class PhantomAnatomyDetector(AnatomyDetector):
    backend_id = "phantom-anatomy"
    thread_safe = True

    def detect(self, image: np.ndarray) -> list[RegionDetection]:
        offset = ph.detect_offset(image)
        if offset is None:
            return []
        boxes = ph.region_boxes(np.shape(image)[0], offset)
        return [RegionDetection(name, boxes[name], 1.0) for name in sorted(boxes)]


class PhantomClassifier(PathologyClassifier):
    """Multi-label probabilities from the strongest template loading per class."""

    backend_id = "phantom-classifier"
    thread_safe = True

    def classify(self, image: np.ndarray) -> dict[PathologyLabel, float]:
        out = {label: FLOOR for label in PathologyLabel}
        loadings = ph.decompose(image)
        if loadings:
            for f, c in loadings.items():
                out[f.label] = max(out[f.label], loading_to_probability(c))
        found = any(p >= 0.5 for label, p in out.items() if label is not PathologyLabel.NO_FINDING)
        out[PathologyLabel.NO_FINDING] = FLOOR if found else FLOOR + SPAN
        return out


def phantom_registry() -> AdapterRegistry:
    """A registry with every role bound to its phantom backend."""
    return AdapterRegistry(
        grounder=PhantomGrounder(),
        generator=PhantomGenerator(),
        segmenter=PhantomSegmenter(),
        anatomy_detector=PhantomAnatomyDetector(),
        pathology_classifier=PhantomClassifier(),
        text_extractor=RuleTextExtractor(default_vocabulary().regions),
    )
