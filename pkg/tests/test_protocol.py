import pytest

from cxrval.core import PathologyLabel as L
from cxrval.evaluation.protocol import (
    ProtocolConfig,
    calibration_samples,
    run_protocol,
    sample_donors,
)
from cxrval.evaluation.roc import calibrate
from cxrval.phantom import fixture_studies, make_phantom_study
from cxrval.schemas import validate


def test_donors_are_disjoint_and_seeded():
    sets = [frozenset({L.EDEMA}), frozenset({L.EDEMA, L.FRACTURE}), frozenset({L.CARDIOMEGALY}), frozenset({L.FRACTURE})]
    donors = sample_donors(sets, 3)
    assert donors == sample_donors(sets, 3)
    for i, d in enumerate(donors):
        assert d is not None and d != i and not (sets[i] & sets[d])
    assert sample_donors([frozenset({L.EDEMA})] * 3, 0) == [None, None, None]


def test_protocol_needs_two_studies(registry):
    with pytest.raises(ValueError, match="at least two"):
        run_protocol(fixture_studies(1), registry)


def test_no_donor_records(registry):
    studies = [make_phantom_study({"study_id": f"e{i}", "pathologies": ["Edema"], "seed": i})[0] for i in range(2)]
    records, summary = run_protocol(studies, registry)
    assert [r.status for r in records] == ["no_donor", "no_donor"]
    assert summary["n_no_donor"] == 2


def test_protocol_on_fixture(protocol_run):
    records, summary = protocol_run
    assert len(records) == 100
    assert sum(summary["scenario_counts"].values()) == summary["n_ok"] == 100
    assert summary["real"]["ms_ssim_macro"] - summary["false"]["ms_ssim_macro"] >= 0.2
    assert summary["real"]["chi2_mean"] < summary["false"]["chi2_mean"]
    for r in records:
        d = r.to_dict()
        validate(d, "protocol_record")
        assert r.donor_id != r.study_id
        assert d["real"]["scenario"] == d["false"]["scenario"] == d["scenario"]
    validate(summary, "protocol_summary")


def test_chi2_flag_follows_delta(registry):
    studies = fixture_studies(6)
    base, _ = run_protocol(studies, registry, ProtocolConfig(delta=0.0))
    strict, _ = run_protocol(studies, registry, ProtocolConfig(delta=10.0))
    assert any(r.chi2_rr_lower for r in base)
    assert not any(r.chi2_rr_lower for r in strict)


def test_calibration_samples_from_protocol(protocol_run):
    records, _ = protocol_run
    ms, chi_inv, labels = calibration_samples([r.to_dict() for r in records])
    assert len(ms) == len(chi_inv) == len(labels) > 100
    assert all(0 <= m <= 1 for m in ms)
    for name, scores in (("ms_ssim", ms), ("chi2_inverted", chi_inv)):
        res, _ = calibrate(scores, labels, name)
        assert res.j >= 0.8


def test_calibration_skips_unscored():
    rec = {"status": "ok", "reliability": {"aggregate": {"ms_ssim": None, "chi2": None}},
           "validity": {"original": False, "generated": False}}
    err = {"status": "error"}
    assert calibration_samples([rec, err]) == ([], [], [])
