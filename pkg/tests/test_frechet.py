import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from cxrval.scoring.frechet import frechet_distance


def frechet_sqrtm(a, b):
    mu_a, mu_b = a.mean(0), b.mean(0)
    sa, sb = np.atleast_2d(np.cov(a, rowvar=False)), np.atleast_2d(np.cov(b, rowvar=False))
    cross = linalg.sqrtm(sa @ sb).real
    return float(np.sum((mu_a - mu_b) ** 2) + np.trace(sa + sb - 2 * cross))


def test_unit_shift_in_one_dimension():
    x = np.random.default_rng(0).normal(size=500)
    assert frechet_distance(x, x + 1.0) == pytest.approx(1.0, abs=1e-6)


def test_identical_sets():
    x = np.random.default_rng(1).normal(size=(300, 6))
    assert frechet_distance(x, x) <= 1e-6


@given(st.integers(0, 2**31), st.integers(1, 5))
@settings(max_examples=25)
def test_matches_general_matrix_sqrt(seed, d):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(50, d)) @ rng.normal(size=(d, d))
    b = rng.normal(size=(60, d)) + rng.normal(size=d)
    assert frechet_distance(a, b) == pytest.approx(frechet_sqrtm(a, b), rel=1e-6, abs=1e-6)
    assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), rel=1e-6, abs=1e-6)


def test_input_checks():
    with pytest.raises(ValueError, match="at least 2"):
        frechet_distance(np.zeros((1, 3)), np.zeros((4, 3)))
    with pytest.raises(ValueError, match="dimension"):
        frechet_distance(np.zeros((4, 3)), np.zeros((4, 2)))
