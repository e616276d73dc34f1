import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cxrval.core import Box
from cxrval.scoring.ssim import (
    SsimConfig,
    downsample,
    extract_roi,
    feasible_scales,
    ms_ssim,
    roi_window,
    ssim,
)
from oracles import ms_ssim_oracle, ssim_terms


def _pair(seed, h, w):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, size=(h, w)).astype(float)
    b = np.clip(a + rng.normal(0, 30, size=(h, w)), 0, 255)
    return a, b


def test_weights_are_normalized():
    cfg = SsimConfig()
    assert sum(cfg.scale_weights) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        SsimConfig(scale_weights=(0.5, 0.6))
    with pytest.raises(ValueError):
        SsimConfig(window=10)


@pytest.mark.parametrize("seed, h, w", [(0, 11, 11), (1, 23, 40), (2, 64, 64)])
def test_ssim_matches_direct_summation(seed, h, w):
    a, b = _pair(seed, h, w)
    assert ssim(a, b) == pytest.approx(ssim_terms(a, b)[0], abs=1e-9)


@pytest.mark.parametrize("side, scales", [(11, 1), (21, 1), (22, 2), (44, 3), (87, 3), (88, 4), (176, 5), (500, 5)])
def test_feasible_scales(side, scales):
    assert feasible_scales((side, side + 3)) == scales


def test_too_small_is_rejected():
    with pytest.raises(ValueError, match="smaller than"):
        ms_ssim(np.zeros((10, 30)), np.zeros((10, 30)))
    with pytest.raises(ValueError, match="dimension mismatch"):
        ms_ssim(np.zeros((20, 20)), np.zeros((20, 21)))


@pytest.mark.parametrize("seed, h, w", [(3, 30, 30), (4, 50, 90), (5, 100, 100), (6, 176, 180)])
def test_ms_ssim_matches_oracle(seed, h, w):
    a, b = _pair(seed, h, w)
    value, n = ms_ssim(a, b, full=True)
    ref, ref_n = ms_ssim_oracle(a, b)
    assert n == ref_n
    assert value == pytest.approx(ref, abs=1e-6)


def test_identical_images_score_one():
    a, _ = _pair(7, 60, 60)
    assert ms_ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_anticorrelated_images_clamp_to_zero():
    rng = np.random.default_rng(8)
    a = rng.integers(0, 256, size=(40, 40)).astype(float)
    assert ms_ssim(a, 255 - a) == 0.0


@given(st.integers(0, 2**31), st.integers(11, 48), st.integers(11, 48))
@settings(max_examples=30)
def test_ms_ssim_bounded_and_symmetric(seed, h, w):
    a, b = _pair(seed, h, w)
    v = ms_ssim(a, b)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(ms_ssim(b, a), abs=1e-12)


def test_downsample_drops_odd_edge():
    x = np.arange(15.0).reshape(3, 5)
    assert np.array_equal(downsample(x), [[3.0, 5.0]])


def test_roi_window_pads_and_snaps():
    assert roi_window(Box(20, 20, 40, 40), (100, 100)) == (19, 19, 41, 41)
    assert roi_window(Box(0, 0, 40, 40), (30, 30)) == (0, 0, 30, 30)


def test_roi_window_grows_small_boxes_inside_frame():
    assert roi_window(Box(50, 50, 52, 52), (100, 100)) == (46, 46, 57, 57)
    assert roi_window(Box(0, 98, 2, 100), (100, 100)) == (0, 89, 11, 100)
    with pytest.raises(ValueError, match="outside"):
        roi_window(Box(200, 200, 210, 210), (100, 100))
    with pytest.raises(ValueError):
        roi_window(Box(0, 0, 2, 2), (8, 100))


@given(st.integers(0, 90), st.integers(0, 90), st.integers(1, 60), st.integers(1, 60), st.floats(0, 0.3))
def test_roi_window_properties(x, y, w, h, pad):
    box = Box(x, y, min(x + w, 100), min(y + h, 100))
    x0, y0, x1, y1 = roi_window(box, (100, 100), pad)
    assert 0 <= x0 and 0 <= y0 and x1 <= 100 and y1 <= 100
    assert x1 - x0 >= 11 and y1 - y0 >= 11
    assert x0 <= box.x_min and y0 <= box.y_min and x1 >= box.x_max and y1 >= box.y_max
    assert extract_roi(np.zeros((100, 100)), box, pad).shape == (y1 - y0, x1 - x0)
