"""Deterministic signal-processing primitives shared across the package."""

from .audio_io import (
    CODEC_RATE_HZ,
    FEATURE_RATE_HZ,
    Waveform,
    read_wav,
    resample,
    write_wav,
)
from .distance import (
    LOG_MAG_EPS,
    RESOLUTIONS,
    log_magnitude_l1,
    multi_res_spectral_distance,
    spectral_convergence,
)
from .pitch import PitchTrack, extract_pitch, phone_average_pitch
from .spectral import (
    SpectrogramConfig,
    frame_count,
    mel_filterbank,
    mel_spectrogram,
    stft,
    stft_raw,
)
from .ssim import ssim
from .wavelet import haar_dwt, haar_idwt

__all__ = [
    "CODEC_RATE_HZ",
    "FEATURE_RATE_HZ",
    "LOG_MAG_EPS",
    "PitchTrack",
    "RESOLUTIONS",
    "SpectrogramConfig",
    "Waveform",
    "extract_pitch",
    "frame_count",
    "haar_dwt",
    "haar_idwt",
    "log_magnitude_l1",
    "mel_filterbank",
    "mel_spectrogram",
    "multi_res_spectral_distance",
    "phone_average_pitch",
    "read_wav",
    "resample",
    "spectral_convergence",
    "ssim",
    "stft",
    "stft_raw",
    "write_wav",
]
