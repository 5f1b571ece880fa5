"""Structural similarity between two equally shaped matrices.

Callers are expected to normalize both inputs to [0, 1] jointly before
calling; the constants below assume a unit dynamic range.
"""

import numpy as np
from scipy.signal import convolve

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2

WINDOW_SIZE = 7
WINDOW_SIGMA = 1.5


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """1-D Gaussian kernel normalized to sum 1."""
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    kernel = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    return kernel / kernel.sum()


def _local_mean(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable valid-mode filtering; output shrinks by (len(kernel)-1) per axis.
    x = convolve(x, kernel[:, None], mode="valid")
    return convolve(x, kernel[None, :], mode="valid")


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM over a Gaussian-weighted sliding window.

    The window is 7x7 where the maps allow it and shrinks to the largest odd
    size that fits otherwise, down to 1x1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("ssim expects 2-D matrices")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < 1:
        raise ValueError("ssim inputs must be non-empty")

    size = min(WINDOW_SIZE, a.shape[0], a.shape[1])
    if size % 2 == 0:
        size -= 1
    kernel = gaussian_window(size, WINDOW_SIGMA)

    mu_a = _local_mean(a, kernel)
    mu_b = _local_mean(b, kernel)
    var_a = _local_mean(a * a, kernel) - mu_a * mu_a
    var_b = _local_mean(b * b, kernel) - mu_b * mu_b
    cov = _local_mean(a * b, kernel) - mu_a * mu_b

    score = ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)) / (
        (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    )
    return float(np.mean(score))
