"""Frame-level f0 estimation and phone-level averaging.

The extractor is a normalized-autocorrelation pitch tracker over a 50-600 Hz
search band with a fixed voicing threshold. It is plain and deterministic:
good enough for tones and clean harmonic material, which is all the rest of
the package asks of it.
"""

from dataclasses import dataclass

import numpy as np

from .audio_io import FEATURE_RATE_HZ, Waveform
from .spectral import frame_count

F0_MIN_HZ = 50.0
F0_MAX_HZ = 600.0
VOICING_THRESHOLD = 0.3

# Frames quieter than this RMS are declared unvoiced outright.
SILENCE_RMS = 1e-4

# A shorter-lag peak within this fraction of the global peak wins, so a
# strong first harmonic is not mistaken for half the true f0.
OCTAVE_PREFERENCE = 0.85

ANALYSIS_WINDOW = 800


@dataclass
class PitchTrack:
    """Per-frame f0 in Hz, 0 where unvoiced."""

    f0_hz: np.ndarray
    hop_length_samples: int

    def __post_init__(self):
        self.f0_hz = np.asarray(self.f0_hz, dtype=np.float64)
        if self.f0_hz.ndim != 1:
            raise ValueError(f"f0 track must be 1-D, got shape {self.f0_hz.shape}")
        if self.f0_hz.size and float(np.min(self.f0_hz)) < 0:
            raise ValueError("f0 values must be non-negative")
        voiced = self.f0_hz[self.f0_hz > 0]
        if voiced.size and not (
            float(np.min(voiced)) >= F0_MIN_HZ - 1e-6
            and float(np.max(voiced)) <= F0_MAX_HZ + 1e-6
        ):
            raise ValueError("voiced f0 values must lie within the search band")
        if self.hop_length_samples <= 0:
            raise ValueError("hop must be positive")

    @property
    def num_frames(self) -> int:
        return int(self.f0_hz.size)


def _normalized_autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """r[tau] = sum x[t] x[t+tau] / sqrt(sum_head x^2 * sum_tail x^2)."""
    n = frame.size
    fft_size = 1
    while fft_size < 2 * n:
        fft_size *= 2
    spectrum = np.fft.rfft(frame, n=fft_size)
    raw = np.fft.irfft(spectrum * np.conj(spectrum), n=fft_size)[: max_lag + 1]

    energy = np.concatenate([[0.0], np.cumsum(frame * frame)])
    lags = np.arange(max_lag + 1)
    head = energy[n - lags]            # sum over t in [0, n-tau)
    tail = energy[n] - energy[lags]    # sum over t in [tau, n)
    denom = np.sqrt(np.maximum(head * tail, 1e-20))
    return raw / denom


def extract_pitch(wave: Waveform, hop: int) -> PitchTrack:
    """Estimate one f0 value per analysis frame of a 16 kHz waveform.

    Framing matches the spectrogram contract: ``len // hop + 1`` frames,
    each centered at ``i * hop``. Silence and frames whose best normalized
    autocorrelation peak falls below the voicing threshold come out as 0.
    """
    if wave.sample_rate_hz != FEATURE_RATE_HZ:
        raise ValueError(f"pitch extraction expects {FEATURE_RATE_HZ} Hz input")
    if hop <= 0:
        raise ValueError("hop must be positive")

    rate = wave.sample_rate_hz
    lag_min = int(round(rate / F0_MAX_HZ))
    lag_max = int(round(rate / F0_MIN_HZ))
    win = ANALYSIS_WINDOW
    half = win // 2

    samples = wave.samples
    n_frames = frame_count(samples.size, hop)
    padded = np.pad(samples, (half, win), mode="constant")

    f0 = np.zeros(n_frames)
    for i in range(n_frames):
        frame = padded[i * hop:i * hop + win]
        frame = frame - frame.mean()
        if np.sqrt(np.mean(frame * frame)) < SILENCE_RMS:
            continue
        r = _normalized_autocorrelation(frame, lag_max)
        band = r[lag_min:lag_max + 1]
        best = float(np.max(band))
        if best < VOICING_THRESHOLD:
            continue

        # Local maxima in the band, earliest lag near the global peak first.
        interior = np.arange(1, band.size - 1)
        is_peak = (band[interior] >= band[interior - 1]) & (band[interior] >= band[interior + 1])
        peaks = interior[is_peak & (band[interior] >= OCTAVE_PREFERENCE * best)]
        if peaks.size:
            lag = lag_min + int(peaks[0])
        else:
            lag = lag_min + int(np.argmax(band))

        # Parabolic refinement around the integer peak.
        if lag_min < lag < lag_max:
            left, mid, right = r[lag - 1], r[lag], r[lag + 1]
            curvature = left - 2.0 * mid + right
            if abs(curvature) > 1e-12:
                shift = 0.5 * (left - right) / curvature
                lag = lag + float(np.clip(shift, -1.0, 1.0))
        f0[i] = float(np.clip(rate / lag, F0_MIN_HZ, F0_MAX_HZ))

    return PitchTrack(f0, hop)


def phone_average_pitch(track: PitchTrack, durations) -> np.ndarray:
    """Average voiced f0 over each phone's frame span.

    Spans with no voiced frames (including zero-length spans) average to 0.
    """
    durations = np.asarray(durations, dtype=np.int64)
    if durations.ndim != 1:
        raise ValueError("durations must be a 1-D integer array")
    if durations.size and int(np.min(durations)) < 0:
        raise ValueError("durations must be non-negative")
    if int(np.sum(durations)) > track.num_frames:
        raise ValueError(
            f"durations cover {int(np.sum(durations))} frames, track has {track.num_frames}"
        )

    out = np.zeros(durations.size)
    start = 0
    for p, dur in enumerate(durations):
        span = track.f0_hz[start:start + int(dur)]
        voiced = span[span > 0]
        if voiced.size:
            out[p] = float(np.mean(voiced))
        start += int(dur)
    return out
