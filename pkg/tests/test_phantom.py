import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cxrval.core import PathologyLabel
from cxrval.phantom import (
    Finding,
    PhantomSpecError,
    allowed_zones,
    base_image,
    body_mask,
    decompose,
    detect_offset,
    findings_from_report,
    fixture_config,
    fixture_studies,
    localizable_labels,
    lung_mask,
    make_phantom_study,
    offset_from_lung_mask,
    random_specs,
    render,
    report_for,
    resolve_findings,
    template_for,
)


def test_resolve_accepts_names_zones_and_laterality():
    assert resolve_findings(["Cardiomegaly"]) == (Finding(PathologyLabel.CARDIOMEGALY, "cardiac silhouette"),)
    bi = resolve_findings([{"label": "Edema", "laterality": "bilateral"}])
    assert {f.zone for f in bi} == {"left hilar structures", "right hilar structures"}
    assert resolve_findings(["No Finding"]) == ()


@pytest.mark.parametrize("item, msg", [
    ({"label": "Edema", "zone": "left kidney"}, "unknown zone"),
    ({"label": "Cardiomegaly", "zone": "left lung"}, "cannot be rendered"),
    ({"label": "Pneumonitis"}, "unknown pathology"),
    ({"zone": "left lung"}, "without a label"),
])
def test_resolve_rejects_bad_entries(item, msg):
    with pytest.raises(PhantomSpecError, match=msg):
        resolve_findings([item])


def test_study_spec_validation():
    with pytest.raises(PhantomSpecError):
        make_phantom_study({"size": 64})
    with pytest.raises(PhantomSpecError):
        make_phantom_study({"offset": [0.5, 0]})


def test_report_round_trips_through_text_parsing():
    for label in localizable_labels():
        for zone in allowed_zones(label):
            f = (Finding(label, zone),)
            assert findings_from_report(report_for(f)) == f
    assert report_for(()) == "No acute findings."


def test_study_boxes_cover_templates():
    study, layout = make_phantom_study({"pathologies": ["Pneumothorax", "Cardiomegaly"], "seed": 5, "offset": [3, -2]})
    assert study.gt_pathologies == {PathologyLabel.PNEUMOTHORAX, PathologyLabel.CARDIOMEGALY}
    assert len(study.gt_boxes) == 2
    for f, b in zip(layout.findings, layout.finding_boxes):
        layer = template_for(256, (3, -2), f).layer
        ys, xs = np.nonzero(layer)
        assert (xs.min(), ys.min(), xs.max() + 1, ys.max() + 1) == b.coords()
    assert layout.to_dict()["offset"] == [3, -2]


def test_no_finding_study():
    study, _ = make_phantom_study({"pathologies": [], "seed": 1})
    assert study.is_no_finding and study.gt_boxes == ()


def test_seeds_differ_only_inside_body():
    f = resolve_findings(["Edema"])
    a, b = render(f, 256, seed=1), render(f, 256, seed=2)
    outside = ~body_mask(256)
    assert np.array_equal(a[outside], b[outside])
    assert not np.array_equal(a, b)
    assert np.array_equal(render(f, 256, seed=1), a)


@given(st.integers(-6, 6), st.integers(-6, 6))
@settings(max_examples=25)
def test_offsets_are_recovered(dx, dy):
    assert detect_offset(base_image(256, (dx, dy))) == (dx, dy)
    assert offset_from_lung_mask(lung_mask(256, (dx, dy))) == (dx, dy)


def test_offset_needs_a_body():
    assert detect_offset(np.zeros((256, 256))) is None
    assert detect_offset(np.zeros((100, 100))) is None


def test_decompose_recovers_rendered_findings():
    for seed in range(3):
        study, layout = make_phantom_study(random_specs(1, seed)[0])
        loads = decompose(study.image)
        present = set(layout.findings)
        for f, v in loads.items():
            if f in present:
                assert v > 0.8
            else:
                assert v < 0.2


def test_random_specs_are_seeded():
    assert random_specs(5, 11) == random_specs(5, 11)
    assert random_specs(5, 11) != random_specs(5, 12)


def test_fixture_set_shape(fixture_set):
    cfg = fixture_config()
    assert len(fixture_set) == cfg["count"] == 100
    assert len({s.study_id for s in fixture_set}) == 100
    assert [s.study_id for s in fixture_studies(3)] == [s.study_id for s in fixture_set[:3]]
