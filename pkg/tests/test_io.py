import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cxrval.core import Box, PathologyLabel, Study
from cxrval.io import (
    ManifestError,
    canonical_json,
    load_image,
    load_manifest,
    load_results,
    save_image,
    save_manifest,
    save_results,
)


def _write(path, lines):
    path.write_text("".join(line + "\n" for line in lines))


def test_manifest_round_trip(tmp_path):
    img = (np.arange(64).reshape(8, 8) * 3).astype(np.uint8)
    save_image(img, tmp_path / "a.png")
    s = Study("a", "Edema.", image_path=str(tmp_path / "a.png"), gt_boxes=(Box(1, 1, 4, 4, label="Edema"),),
              gt_pathologies=frozenset({PathologyLabel.EDEMA}), seed=9)
    save_manifest([s], tmp_path / "m.jsonl")
    (loaded,) = load_manifest(tmp_path / "m.jsonl")
    assert loaded == s
    assert np.array_equal(loaded.image, img)


@pytest.mark.parametrize("field", ["study_id", "image_path", "report_text"])
def test_manifest_missing_field_names_line(tmp_path, field):
    rec = {"study_id": "a", "image_path": "a.png", "report_text": "x"}
    ok = json.dumps(rec)
    del rec[field]
    _write(tmp_path / "m.jsonl", [ok.replace('"a"', '"b"'), json.dumps(rec)])
    with pytest.raises(ManifestError, match=f"line 2: missing {field}"):
        load_manifest(tmp_path / "m.jsonl")


def test_manifest_duplicate_and_malformed(tmp_path):
    rec = json.dumps({"study_id": "a", "image_path": "a.png", "report_text": "x"})
    _write(tmp_path / "d.jsonl", [rec, rec])
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(tmp_path / "d.jsonl")
    _write(tmp_path / "bad.jsonl", ["{not json"])
    with pytest.raises(ManifestError, match="line 1: malformed"):
        load_manifest(tmp_path / "bad.jsonl")


def test_manifest_rejects_invalid_gt_box(tmp_path):
    rec = {"study_id": "a", "image_path": "a.png", "report_text": "x",
           "gt_boxes": [{"x_min": 5, "y_min": 0, "x_max": 2, "y_max": 3}]}
    _write(tmp_path / "m.jsonl", [json.dumps(rec)])
    with pytest.raises(ManifestError, match="line 1"):
        load_manifest(tmp_path / "m.jsonl")


def test_sixteen_bit_images_are_rescaled(tmp_path):
    from PIL import Image

    arr = np.array([[0, 1000], [2000, 4000]], dtype=np.uint16)
    Image.fromarray(arr).save(tmp_path / "d.png")
    out = load_image(tmp_path / "d.png")
    assert out.max() == pytest.approx(255.0)
    assert out[0, 1] == pytest.approx(255.0 / 4)


def test_canonical_json_format():
    assert canonical_json({"b": 1.0, "a": [True, None, 2]}) == '{"a":[true,null,2],"b":1.000000}'
    assert canonical_json({"x": 1 / 3}) == '{"x":0.333333}'
    with pytest.raises(ValueError):
        canonical_json({"x": math.nan})


def test_save_results_writes_nothing_on_nan(tmp_path):
    out = tmp_path / "r.jsonl"
    with pytest.raises(ValueError):
        save_results([{"a": 1.0}, {"a": math.inf}], out)
    assert not out.exists()
    save_results([{"a": 1.0}], out)
    assert load_results(out) == [{"a": 1.0}]


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | st.text(max_size=8)
    | st.floats(-1e6, 1e6, allow_nan=False).map(lambda x: round(x, 6)),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=5), inner, max_size=4),
    max_leaves=12,
)


@given(json_values)
def test_canonical_json_is_stable_under_reparse(obj):
    text = canonical_json(obj)
    assert canonical_json(json.loads(text)) == text
