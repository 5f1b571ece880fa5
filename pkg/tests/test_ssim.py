import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqtts.dsp import ssim
from vqtts.dsp.ssim import SSIM_C1, SSIM_C2, gaussian_window


def test_identity():
    rng = np.random.default_rng(5)
    a = rng.random((24, 17))
    assert abs(ssim(a, a) - 1.0) < 1e-6


def test_symmetry():
    rng = np.random.default_rng(6)
    a, b = rng.random((12, 12)), rng.random((12, 12))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_constant_patches_match_closed_form():
    # Constant inputs zero out all variance terms, leaving the luminance
    # factor (2 mu_a mu_b + C1) / (mu_a^2 + mu_b^2 + C1).
    a = np.full((10, 10), 0.5)
    b = np.full((10, 10), 0.75)
    expected = (2 * 0.5 * 0.75 + SSIM_C1) / (0.5**2 + 0.75**2 + SSIM_C1)
    assert ssim(a, b) == pytest.approx(expected, abs=1e-9)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        ssim(np.zeros((3, 3)), np.zeros((3, 4)))


def test_small_maps_use_shrunk_window():
    # 2x2 maps force a 1x1 window; the value must still be finite and 1 on
    # identical inputs.
    a = np.array([[0.1, 0.9], [0.4, 0.6]])
    assert abs(ssim(a, a) - 1.0) < 1e-6
    b = np.array([[0.2, 0.8], [0.5, 0.5]])
    assert -1.0 <= ssim(a, b) <= 1.0


def test_gaussian_window_normalized():
    w = gaussian_window(7, 1.5)
    assert w.shape == (7,)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(w, w[::-1])  # symmetric


@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_range_bound(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((9, 11))
    b = rng.random((9, 11))
    value = ssim(a, b)
    assert -1.0 - 1e-9 <= value <= 1.0 + 1e-9
