"""Keyword-rule report parsing over the 14-class lexicon."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..core import PathologyLabel

L = PathologyLabel

# longest phrases win when spans overlap
LEXICON: dict[str, PathologyLabel] = {
    "atelectasis": L.ATELECTASIS,
    "atelectatic": L.ATELECTASIS,
    "collapse": L.ATELECTASIS,
    "cardiomegaly": L.CARDIOMEGALY,
    "enlarged heart": L.CARDIOMEGALY,
    "cardiac enlargement": L.CARDIOMEGALY,
    "heart is enlarged": L.CARDIOMEGALY,
    "consolidation": L.CONSOLIDATION,
    "consolidations": L.CONSOLIDATION,
    "edema": L.EDEMA,
    "oedema": L.EDEMA,
    "pulmonary edema": L.EDEMA,
    "enlarged cardiomediastinum": L.ENLARGED_CARDIOMEDIASTINUM,
    "widened mediastinum": L.ENLARGED_CARDIOMEDIASTINUM,
    "mediastinal widening": L.ENLARGED_CARDIOMEDIASTINUM,
    "fracture": L.FRACTURE,
    "fractures": L.FRACTURE,
    "lung lesion": L.LUNG_LESION,
    "lesion": L.LUNG_LESION,
    "nodule": L.LUNG_LESION,
    "mass": L.LUNG_LESION,
    "lung opacity": L.LUNG_OPACITY,
    "opacity": L.LUNG_OPACITY,
    "opacities": L.LUNG_OPACITY,
    "opacification": L.LUNG_OPACITY,
    "no finding": L.NO_FINDING,
    "no findings": L.NO_FINDING,
    "no acute findings": L.NO_FINDING,
    "no acute finding": L.NO_FINDING,
    "no acute cardiopulmonary process": L.NO_FINDING,
    "pleural effusion": L.PLEURAL_EFFUSION,
    "pleural effusions": L.PLEURAL_EFFUSION,
    "effusion": L.PLEURAL_EFFUSION,
    "effusions": L.PLEURAL_EFFUSION,
    "pleural other": L.PLEURAL_OTHER,
    "pleural thickening": L.PLEURAL_OTHER,
    "pleural plaque": L.PLEURAL_OTHER,
    "pneumonia": L.PNEUMONIA,
    "pneumothorax": L.PNEUMOTHORAX,
    "support devices": L.SUPPORT_DEVICES,
    "support device": L.SUPPORT_DEVICES,
    "endotracheal tube": L.SUPPORT_DEVICES,
    "catheter": L.SUPPORT_DEVICES,
    "pacemaker": L.SUPPORT_DEVICES,
}

_SENTENCE = re.compile(r"[^.;\n]+")


def _phrase_pattern(phrases: Sequence[str]) -> re.Pattern[str]:
    alts = sorted(phrases, key=len, reverse=True)
    body = "|".join(r"\s+".join(re.escape(w) for w in p.split()) for p in alts)
    return re.compile(rf"(?<![a-z])(?:{body})(?![a-z])", re.IGNORECASE)


_TERM_RE = _phrase_pattern(list(LEXICON))
_NEG_RE = re.compile(r"\b(?:no|without|negative for|free of)\b[^,]*$", re.IGNORECASE)


@dataclass(frozen=True)
class Mention:
    label: PathologyLabel
    term: str
    sentence: str
    laterality: str
    regions: tuple[str, ...] = ()


@dataclass(frozen=True)
class Extraction:
    pathologies: frozenset[PathologyLabel]
    laterality: dict[PathologyLabel, str]
    entities: list[str]
    mentions: tuple[Mention, ...] = field(default=(), compare=False)


def _sentence_laterality(sentence: str) -> str:
    low = sentence.lower()
    has_left = re.search(r"(?<![a-z])left(?![a-z])", low) is not None
    has_right = re.search(r"(?<![a-z])right(?![a-z])", low) is not None
    if re.search(r"(?<![a-z])(bilateral|bibasilar|both)(?![a-z])", low) or (has_left and has_right):
        return "bilateral"
    if has_left:
        return "left"
    if has_right:
        return "right"
    return "unspecified"


def _merge_laterality(a: str, b: str) -> str:
    if a == b or b == "unspecified":
        return a
    if a == "unspecified":
        return b
    return "bilateral"


class RuleTextExtractor:
    """Deterministic lexicon-based pathology and laterality extraction.

    ``region_names`` (optional) are recognized as entities and attached to the
    mentions of the sentence they occur in.
    """

    backend_id = "rules-v1"
    thread_safe = True

    def __init__(self, region_names: Optional[Sequence[str]] = None):
        self.region_names = tuple(region_names or ())
        self._region_re = _phrase_pattern(self.region_names) if self.region_names else None

    def mentions(self, report: str) -> list[Mention]:
        out: list[Mention] = []
        for m in _SENTENCE.finditer(report):
            sentence = m.group(0).strip()
            if not sentence:
                continue
            regions: tuple[str, ...] = ()
            if self._region_re is not None:
                regions = tuple(" ".join(r.group(0).lower().split()) for r in self._region_re.finditer(sentence))
            lat = _sentence_laterality(sentence)
            for t in _TERM_RE.finditer(sentence):
                term = " ".join(t.group(0).lower().split())
                label = LEXICON[term]
                if label is not L.NO_FINDING and _NEG_RE.search(sentence[: t.start()]):
                    continue
                out.append(Mention(label, term, sentence, lat if label is not L.NO_FINDING else "unspecified", regions))
        return out

    def extract(self, report: str) -> Extraction:
        if not report or not report.strip():
            raise ValueError("report text is empty")
        mentions = self.mentions(report)
        laterality: dict[PathologyLabel, str] = {}
        entities: list[str] = []
        for mn in mentions:
            laterality[mn.label] = _merge_laterality(laterality.get(mn.label, "unspecified"), mn.laterality)
            for e in (mn.term, *mn.regions):
                if e not in entities:
                    entities.append(e)
        labels = set(laterality)
        if len(labels) > 1:
            labels.discard(L.NO_FINDING)
            laterality.pop(L.NO_FINDING, None)
        return Extraction(frozenset(labels), laterality, entities, tuple(mentions))
