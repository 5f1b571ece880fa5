"""STFT and log-mel analysis.

All framing in the package goes through :func:`frame_count`: a signal of
``n`` samples analysed with hop ``h`` yields ``n // h + 1`` center-padded
frames, regardless of window or FFT size.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .audio_io import Waveform


@dataclass(frozen=True)
class SpectrogramConfig:
    """Analysis parameters for STFT/mel features.

    Defaults correspond to 50 ms windows with a 12.5 ms hop at 16 kHz.
    """

    sample_rate_hz: int = 16000
    win_length_samples: int = 800
    hop_length_samples: int = 200
    fft_size: int = 1024
    n_mels: int = 80
    fmin_hz: float = 0.0
    fmax_hz: float = 8000.0
    log_floor: float = 1e-5

    def __post_init__(self):
        if not (0 < self.hop_length_samples <= self.win_length_samples <= self.fft_size):
            raise ValueError(
                "need 0 < hop <= win <= fft_size, got "
                f"hop={self.hop_length_samples} win={self.win_length_samples} "
                f"fft={self.fft_size}"
            )
        if not (0 <= self.fmin_hz < self.fmax_hz <= self.sample_rate_hz / 2):
            raise ValueError(
                f"need 0 <= fmin < fmax <= rate/2, got fmin={self.fmin_hz} "
                f"fmax={self.fmax_hz} rate={self.sample_rate_hz}"
            )
        if self.log_floor <= 0:
            raise ValueError(f"log_floor must be positive, got {self.log_floor}")


def frame_count(num_samples: int, hop_length_samples: int) -> int:
    """Number of center-padded analysis frames for a signal."""
    if num_samples < 1:
        raise ValueError("signal must contain at least one sample")
    return num_samples // hop_length_samples + 1


def stft_raw(samples: np.ndarray, fft_size: int, hop_length: int, win_length: int) -> np.ndarray:
    """One-sided STFT of a 1-D signal, [frames x (fft_size/2 + 1)] complex.

    The signal is center-padded by fft_size//2 on both sides (reflect where
    possible, zeros for signals too short to reflect); the periodic Hann
    window is zero-padded symmetrically to fft_size.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size < 1:
        raise ValueError("stft expects a non-empty 1-D signal")
    n_frames = frame_count(samples.size, hop_length)

    pad = fft_size // 2
    if samples.size > pad:
        padded = np.pad(samples, (pad, pad), mode="reflect")
    else:
        padded = np.pad(samples, (pad, pad), mode="constant")

    window = get_window("hann", win_length, fftbins=True)
    left = (fft_size - win_length) // 2
    full_window = np.zeros(fft_size)
    full_window[left:left + win_length] = window

    frames = np.stack(
        [padded[i * hop_length:i * hop_length + fft_size] for i in range(n_frames)]
    )
    return np.fft.rfft(frames * full_window, n=fft_size, axis=1)


def stft(wave: Waveform, cfg: SpectrogramConfig) -> np.ndarray:
    """Complex spectrogram of a waveform, [frames x (fft_size/2 + 1)]."""
    if wave.sample_rate_hz != cfg.sample_rate_hz:
        raise ValueError(
            f"waveform rate {wave.sample_rate_hz} != config rate {cfg.sample_rate_hz}"
        )
    return stft_raw(wave.samples, cfg.fft_size, cfg.hop_length_samples, cfg.win_length_samples)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: SpectrogramConfig) -> np.ndarray:
    """Triangular mel filters on the FFT bin grid, [n_mels x (fft_size/2+1)].

    Filters peak at 1 (no area normalisation), so the filter output is
    linear in input magnitude.
    """
    n_bins = cfg.fft_size // 2 + 1
    mel_points = np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.fmax_hz), cfg.n_mels + 2)
    bin_points = mel_to_hz(mel_points) * cfg.fft_size / cfg.sample_rate_hz

    bins = np.arange(n_bins, dtype=np.float64)
    fb = np.zeros((cfg.n_mels, n_bins))
    for m in range(cfg.n_mels):
        lower, center, upper = bin_points[m], bin_points[m + 1], bin_points[m + 2]
        rising = (bins - lower) / max(center - lower, 1e-9)
        falling = (upper - bins) / max(upper - center, 1e-9)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, 1.0)
    return fb


def mel_spectrogram(wave: Waveform, cfg: SpectrogramConfig) -> np.ndarray:
    """Log-mel spectrogram, [frames x n_mels].

    Mel filters are applied to the STFT magnitude; the log is taken after
    clamping at cfg.log_floor.
    """
    magnitude = np.abs(stft(wave, cfg))
    mel = magnitude @ mel_filterbank(cfg).T
    return np.log(np.maximum(mel, cfg.log_floor))
