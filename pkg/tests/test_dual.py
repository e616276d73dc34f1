import numpy as np
import pytest

from cxrval.adapters.base import AdapterRegistry
from cxrval.adapters.phantom import phantom_registry
from cxrval.core import Box, DualScore, RoiScore, Shift, Study
from cxrval.phantom import make_phantom_study
from cxrval.pipeline import ordered_map, run_studies, score_study
from cxrval.scoring.dual import (
    Scenario,
    ScoreConfig,
    categorize_scenario,
    dual_score,
    paired_windows,
    selection_score,
    study_seed,
)
from cxrval.core import LungMask


@pytest.fixture(scope="module")
def effusion():
    return make_phantom_study({"study_id": "eff", "pathologies": [{"label": "Pleural Effusion", "zone": "left costophrenic angle"}],
                               "seed": 17, "offset": [3, -2]})[0]


def _score(p):
    box = Box(0, 0, 5, 5, probability=p)
    return DualScore.from_rois([RoiScore(box, p, 0.5, 0.1)], [box])


def test_real_report_scores_high(registry, effusion):
    s = dual_score(effusion, registry)
    assert len(s.per_roi) == 1
    assert s.aggregate_detection >= 0.9
    assert s.aggregate_ms_ssim > 0.9
    assert s.interpretable and not s.no_localization
    assert s.shift.anchor_region == "svc" and (s.shift.dx, s.shift.dy) == (0.0, 0.0)


def test_false_report_scores_low(registry, effusion):
    s = dual_score(effusion, registry, report="Cardiomegaly.")
    assert s.aggregate_detection < 0.25
    assert s.aggregate_ms_ssim < dual_score(effusion, registry).aggregate_ms_ssim - 0.2
    assert not s.interpretable


def test_report_without_findings_does_not_localize(registry, effusion):
    s = dual_score(effusion, registry, report="No acute findings.")
    assert s.no_localization and s.per_roi == () and s.aggregate_ms_ssim is None


def test_best_of_n_is_deterministic(registry, effusion):
    cfg = ScoreConfig(best_of_n=3)
    assert dual_score(effusion, registry, cfg) == dual_score(effusion, registry, cfg)


def test_study_seed_rules():
    s = Study("x", "r", pixels=np.zeros((2, 2)), seed=5)
    assert study_seed(s, 99) == 5
    t = Study("x", "r", pixels=np.zeros((2, 2)))
    assert study_seed(t, 1) == study_seed(t, 1) != study_seed(t, 2)


def test_selection_score():
    m = LungMask(np.ones((4, 4), bool))
    assert selection_score(m, m, {"a": 0.2}, {"a": 0.2}) == 1.0
    assert selection_score(m, m, {"a": 0.0}, {"a": 0.5}) == 0.5


def test_paired_windows_translate_and_trim():
    a, g = paired_windows(Box(40, 40, 60, 60), (100, 100), Shift(-5, 3), 0.0, 11)
    assert a == (40, 40, 60, 60) and g == (45, 37, 65, 57)
    a, g = paired_windows(Box(80, 40, 100, 60), (100, 100), Shift(-5, 0), 0.0, 11)
    assert a == (80, 40, 95, 60) and g == (85, 40, 100, 60)
    assert paired_windows(Box(85, 40, 100, 60), (100, 100), Shift(-10, 0), 0.0, 11) is None


def test_scenarios():
    hi, lo = _score(0.9), _score(0.1)
    assert categorize_scenario(hi, hi) is Scenario.BOTH_VALID
    assert categorize_scenario(hi, lo) is Scenario.ONLY_RR
    assert categorize_scenario(lo, hi) is Scenario.ONLY_FR
    assert categorize_scenario(lo, lo) is Scenario.NEITHER
    assert categorize_scenario(lo, lo, tau_det=0.05) is Scenario.BOTH_VALID
    assert str(Scenario.ONLY_RR) == "OnlyRR"


def test_ordered_map_keeps_order():
    assert ordered_map(lambda x: x * x, list(range(50)), workers=8) == [x * x for x in range(50)]
    with pytest.raises(ValueError):
        ordered_map(abs, [1], workers=0)


class _FailingGrounder:
    backend_id = "flaky-grounder"

    def localize(self, req):
        raise RuntimeError("CUDA out of memory")


def test_failing_backend_yields_error_record(effusion):
    reg = phantom_registry()
    reg.bind("grounder", _FailingGrounder())
    score, rec = score_study(effusion, reg)
    assert score is None
    assert rec["status"] == "error" and rec["backend_id"] == "flaky-grounder"
    assert "CUDA out of memory" in rec["error"]


def test_run_studies_isolates_failures(registry, effusion):
    broken = Study("broken", "Edema.", image_path="/nonexistent/broken.png")
    recs = run_studies([effusion, broken], registry, workers=2)
    assert [r["study_id"] for r in recs] == ["eff", "broken"]
    assert recs[0]["status"] == "ok" and recs[1]["status"] == "error"
    assert recs[0]["validity"]["original"] and recs[0]["validity"]["generated"]
    assert recs[0]["text_pathologies"] == ["Pleural Effusion"]


def test_run_studies_requires_all_roles(effusion):
    from cxrval.adapters.base import ConfigError

    with pytest.raises(ConfigError):
        run_studies([effusion], AdapterRegistry())
