"""Real-versus-false report evaluation.

Every study is scored twice on its own image: once with its report and
once with a report borrowed from a donor study whose pathology set is
disjoint from its own. The pair of scores places the study in one of four
scenarios and feeds the calibration samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from ..adapters.base import AdapterError, AdapterRegistry
from ..core import DualScore, PathologyLabel, Study
from ..pipeline import ordered_map, score_study
from ..scoring.dual import Scenario, ScoreConfig, categorize_scenario
from .stats import per_pathology_stats


@dataclass(frozen=True)
class ProtocolConfig:
    score: ScoreConfig = field(default_factory=ScoreConfig)
    seed: int = 0
    delta: float = 0.0
    workers: int = 1


@dataclass(frozen=True)
class EvalRecord:
    study_id: str
    status: str
    pathologies: tuple[str, ...]
    donor_id: Optional[str] = None
    scenario: Optional[Scenario] = None
    rr_score: Optional[DualScore] = field(default=None, compare=False)
    fr_score: Optional[DualScore] = field(default=None, compare=False)
    chi2_rr_lower: Optional[bool] = None
    real: Optional[dict[str, Any]] = None
    false: Optional[dict[str, Any]] = None
    error: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "study_id": self.study_id, "status": self.status, "pathologies": list(self.pathologies),
            "donor_id": self.donor_id, "scenario": None if self.scenario is None else self.scenario.value,
            "chi2_rr_lower": self.chi2_rr_lower, "real": self.real, "false": self.false, "error": self.error,
        }


def pathology_set(study: Study, registry: AdapterRegistry) -> frozenset[PathologyLabel]:
    """Ground-truth labels, or the text extractor's reading of the report."""
    if study.gt_pathologies is not None:
        return study.gt_pathologies
    return registry.extract(study.report_text).pathologies


def sample_donors(sets: Sequence[frozenset], seed: int) -> list[Optional[int]]:
    """One donor index per study with a disjoint set, drawn in study order."""
    rng = np.random.default_rng(seed)
    out: list[Optional[int]] = []
    for i, s in enumerate(sets):
        eligible = [j for j, t in enumerate(sets) if j != i and not (s & t)]
        out.append(eligible[int(rng.integers(len(eligible)))] if eligible else None)
    return out


def _evaluate(study: Study, donor: Optional[Study], tags: tuple[str, ...], registry: AdapterRegistry,
              cfg: ProtocolConfig) -> EvalRecord:
    if donor is None:
        return EvalRecord(study.study_id, "no_donor", tags, error="no study with a disjoint pathology set")
    rr, real = score_study(study, registry, cfg.score)
    fr, false = score_study(study, registry, cfg.score, report=donor.report_text, report_kind="false")
    if rr is None or fr is None:
        msg = (real if rr is None else false).get("error")
        return EvalRecord(study.study_id, "error", tags, donor.study_id, real=real, false=false, error=msg)
    scenario = categorize_scenario(rr, fr, cfg.score.tau_det)
    real["scenario"] = false["scenario"] = scenario.value
    lower = None
    if rr.aggregate_chi2 is not None and fr.aggregate_chi2 is not None:
        lower = rr.aggregate_chi2 + cfg.delta < fr.aggregate_chi2
    return EvalRecord(study.study_id, "ok", tags, donor.study_id, scenario, rr, fr, lower, real, false)


def _mean(values: list[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def _ms_ssim_summary(records: Sequence[EvalRecord], kind: str) -> dict[str, Any]:
    macro, micro, chi = [], [], []
    for r in records:
        score = r.rr_score if kind == "real" else r.fr_score
        if score is None or score.aggregate_ms_ssim is None:
            continue
        macro.append(score.aggregate_ms_ssim)
        chi.append(score.aggregate_chi2)
        micro.extend(roi.ms_ssim for roi in score.per_roi)
    return {"n_scored": len(macro), "n_rois": len(micro), "ms_ssim_macro": _mean(macro),
            "ms_ssim_micro": _mean(micro), "chi2_mean": _mean(chi)}


def summarize_protocol(records: Sequence[EvalRecord]) -> dict[str, Any]:
    ok = [r for r in records if r.status == "ok"]
    by_scenario = {}
    for s in Scenario:
        bucket = [r for r in ok if r.scenario is s]
        by_scenario[s.value] = {"n": len(bucket), "real": _ms_ssim_summary(bucket, "real"),
                                "false": _ms_ssim_summary(bucket, "false")}
    dicts = [r.to_dict() for r in ok]
    return {
        "n_studies": len(records),
        "n_ok": len(ok),
        "n_error": sum(r.status == "error" for r in records),
        "n_no_donor": sum(r.status == "no_donor" for r in records),
        "scenario_counts": {s: v["n"] for s, v in by_scenario.items()},
        "by_scenario": by_scenario,
        "real": _ms_ssim_summary(ok, "real"),
        "false": _ms_ssim_summary(ok, "false"),
        "chi2_rr_lower_count": sum(bool(r.chi2_rr_lower) for r in ok),
        "per_pathology": {"real": per_pathology_stats(dicts, "real"), "false": per_pathology_stats(dicts, "false")},
    }


def run_protocol(studies: Sequence[Study], registry: AdapterRegistry,
                 cfg: ProtocolConfig = ProtocolConfig()) -> tuple[list[EvalRecord], dict[str, Any]]:
    """Score every study with its real report and a sampled false report."""
    studies = list(studies)
    if len(studies) < 2:
        raise ValueError("the protocol needs at least two studies to draw false reports from")
    registry.require_all()
    sets: list[frozenset] = []
    for s in studies:
        try:
            sets.append(pathology_set(s, registry))
        except AdapterError:
            sets.append(frozenset())
    donors = sample_donors(sets, cfg.seed)

    def work(i: int) -> EvalRecord:
        tags = tuple(sorted(p.value for p in sets[i]))
        d = donors[i]
        return _evaluate(studies[i], None if d is None else studies[d], tags, registry, cfg)

    records = ordered_map(work, list(range(len(studies))), cfg.workers)
    return records, summarize_protocol(records)


def calibration_samples(records: Sequence[dict[str, Any]]) -> tuple[list[float], list[float], list[int]]:
    """MS-SSIM, inverted chi-square and labels from scored study records.

    A sample is labeled positive when the grounder localizes validly on both
    the original and the generated image. Records without an aggregate score
    are skipped. Protocol records contribute their real and false halves.
    """
    flat: list[dict[str, Any]] = []
    for rec in records:
        if "real" in rec or "false" in rec:
            flat.extend(r for r in (rec.get("real"), rec.get("false")) if r)
        else:
            flat.append(rec)
    ms, chi_inv, labels = [], [], []
    for r in flat:
        if r.get("status") != "ok":
            continue
        agg = r["reliability"]["aggregate"]
        if agg.get("ms_ssim") is None:
            continue
        v = r["validity"]
        ms.append(float(agg["ms_ssim"]))
        chi_inv.append(1.0 - float(agg["chi2"]))
        labels.append(int(bool(v["original"]) and bool(v["generated"])))
    return ms, chi_inv, labels
