"""Waveform container, PCM-16 WAV I/O, and sample-rate conversion."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

FEATURE_RATE_HZ = 16000
CODEC_RATE_HZ = 24000

# Kaiser beta for the polyphase windowed-sinc resampler.  beta=14 gives a
# ~110 dB stopband, far below the 16-bit noise floor.
RESAMPLE_KAISER_BETA = 14.0

PCM16_SCALE = 32767


@dataclass
class Waveform:
    """Mono audio samples in [-1, 1] with a declared sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"waveform must be mono 1-D, got shape {self.samples.shape}")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.samples.size and float(np.max(np.abs(self.samples))) > 1.0 + 1e-9:
            raise ValueError("waveform samples must lie in [-1, 1]")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")

    @property
    def num_samples(self) -> int:
        return int(self.samples.size)

    @property
    def duration_seconds(self) -> float:
        return self.samples.size / self.sample_rate_hz


def read_wav(path) -> Waveform:
    """Read a mono PCM-16 WAV file into a float Waveform."""
    rate, data = wavfile.read(path)
    if data.dtype != np.int16:
        raise ValueError(f"{path}: expected PCM-16 WAV, got dtype {data.dtype}")
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono WAV, got {data.shape[1]} channels")
    # Same scale as write_wav; only the unreachable-by-us -32768 value clips.
    samples = np.clip(data.astype(np.float64) / PCM16_SCALE, -1.0, 1.0)
    return Waveform(samples, int(rate))


def write_wav(path, wave: Waveform) -> None:
    """Write a Waveform as a mono PCM-16 WAV file."""
    clipped = np.clip(wave.samples, -1.0, 1.0)
    pcm = np.round(clipped * PCM16_SCALE).astype(np.int16)
    wavfile.write(path, wave.sample_rate_hz, pcm)


def resample(wave: Waveform, target_rate_hz: int) -> Waveform:
    """Resample with a polyphase windowed-sinc filter (Kaiser beta 14).

    Output is clipped to [-1, 1]; windowed-sinc ringing can overshoot by a
    few percent on full-scale signals.
    """
    if target_rate_hz <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate_hz}")
    if target_rate_hz == wave.sample_rate_hz:
        return Waveform(wave.samples.copy(), wave.sample_rate_hz)
    g = math.gcd(target_rate_hz, wave.sample_rate_hz)
    up, down = target_rate_hz // g, wave.sample_rate_hz // g
    out = resample_poly(wave.samples, up, down, window=("kaiser", RESAMPLE_KAISER_BETA))
    return Waveform(np.clip(out, -1.0, 1.0), target_rate_hz)
