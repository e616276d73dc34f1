import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cxrval.core import Box
from cxrval.evaluation.grounding import average_precision, grounding_map, grounding_miou
from oracles import ap_enumeration

LABELS = ("A", "B")


def test_average_precision_examples():
    assert average_precision([True, True], 2) == 1.0
    assert average_precision([False, True], 1) == 0.5
    assert average_precision([True, False, True], 4) == pytest.approx(0.25 * 1 + 0.25 * (2 / 3))
    assert average_precision([], 3) == 0.0
    with pytest.raises(ValueError):
        average_precision([True], 0)


def test_map_skips_classes_without_ground_truth():
    gts = {"s1": [Box(0, 0, 10, 10, label="A")]}
    preds = {"s1": [Box(0, 0, 10, 10, label="A", probability=0.9), Box(0, 0, 10, 10, label="B", probability=0.8)]}
    out = grounding_map(preds, gts)
    assert out == {"per_class_ap": {"A": 1.0}, "map": 1.0}
    with pytest.raises(ValueError, match="undefined"):
        grounding_map(preds, {"s1": []})


def test_miou_prefers_phrase_match():
    gts = {"s": [Box(0, 0, 10, 10, label="Edema", phrase="Edema in left lung"),
                 Box(20, 0, 30, 10, label="Edema", phrase="Edema in right lung")]}
    preds = {"s": [Box(20, 0, 30, 10, label="Edema", phrase="Edema in right lung", probability=0.9)]}
    assert grounding_miou(preds, gts) == 1.0
    assert grounding_miou({}, gts) == 0.0


@st.composite
def instance(draw):
    def box():
        x0, y0 = draw(st.integers(0, 20)), draw(st.integers(0, 20))
        return (x0, y0, x0 + draw(st.integers(2, 12)), y0 + draw(st.integers(2, 12)))

    studies = []
    for _ in range(draw(st.integers(1, 3))):
        gts = [(draw(st.sampled_from(LABELS)), box()) for _ in range(draw(st.integers(0, 5)))]
        preds = [(draw(st.integers(1, 10)) / 10, draw(st.sampled_from(LABELS)), box())
                 for _ in range(draw(st.integers(0, 5)))]
        studies.append((preds, gts))
    return studies


def _as_boxes(studies):
    preds = {f"s{i}": [Box(*b, label=l, probability=p) for p, l, b in ps] for i, (ps, _) in enumerate(studies)}
    gts = {f"s{i}": [Box(*b, label=l) for l, b in gs] for i, (_, gs) in enumerate(studies)}
    return preds, gts


@given(instance())
@settings(max_examples=150)
def test_map_matches_rank_enumeration(studies):
    preds, gts = _as_boxes(studies)
    present = sorted({l for _, gs in studies for l, _ in gs})
    if not present:
        with pytest.raises(ValueError):
            grounding_map(preds, gts)
        return
    out = grounding_map(preds, gts)
    expected = {l: ap_enumeration(studies, l) for l in present}
    assert out["per_class_ap"] == pytest.approx(expected, abs=1e-9)
    assert out["map"] == pytest.approx(np.mean(list(expected.values())), abs=1e-9)
