"""Multi-resolution spectral distance between two waveforms.

Stands in for perceptual quality scoring during evaluation: the sum, over
three STFT resolutions, of a spectral-convergence term and a log-magnitude
L1 term. Lower is better; identical signals score 0.
"""

import numpy as np

from .audio_io import Waveform
from .spectral import stft_raw

# (fft_size, hop, win) per resolution.
RESOLUTIONS = ((512, 50, 240), (1024, 120, 600), (2048, 240, 1200))

LOG_MAG_EPS = 1e-7


def spectral_convergence(reference_mag: np.ndarray, estimate_mag: np.ndarray) -> float:
    """Frobenius error of the magnitudes, relative to the reference."""
    num = float(np.linalg.norm(reference_mag - estimate_mag))
    den = float(np.linalg.norm(reference_mag))
    return num / max(den, 1e-12)


def log_magnitude_l1(x_mag: np.ndarray, y_mag: np.ndarray) -> float:
    """Mean absolute difference of log magnitudes (symmetric in x, y)."""
    return float(np.mean(np.abs(np.log(x_mag + LOG_MAG_EPS) - np.log(y_mag + LOG_MAG_EPS))))


def multi_res_spectral_distance(x: Waveform, y: Waveform) -> float:
    """Sum of spectral-convergence and log-magnitude terms over all resolutions.

    ``x`` is treated as the reference in the convergence term, so the overall
    value is not exactly symmetric; the log-magnitude term is.
    """
    if x.sample_rate_hz != y.sample_rate_hz:
        raise ValueError(
            f"sample rate mismatch: {x.sample_rate_hz} vs {y.sample_rate_hz}"
        )
    if x.num_samples != y.num_samples:
        raise ValueError(f"length mismatch: {x.num_samples} vs {y.num_samples}")

    total = 0.0
    for fft_size, hop, win in RESOLUTIONS:
        x_mag = np.abs(stft_raw(x.samples, fft_size, hop, win))
        y_mag = np.abs(stft_raw(y.samples, fft_size, hop, win))
        total += spectral_convergence(x_mag, y_mag)
        total += log_magnitude_l1(x_mag, y_mag)
    return total
