"""Differentiable torch counterparts of the numpy analysis ops.

Training losses need gradients through STFT magnitudes, the multi-resolution
spectral distance, and SSIM. These mirror the numpy reference semantics in
``vqtts.dsp`` (same framing, same windows, same constants); the test suite
checks numeric agreement between the two routes.
"""

import math

import torch
import torch.nn.functional as F

from .dsp.distance import LOG_MAG_EPS, RESOLUTIONS
from .dsp.ssim import SSIM_C1, SSIM_C2, WINDOW_SIGMA, WINDOW_SIZE

_WINDOW_CACHE = {}


def padded_hann(fft_size: int, win_length: int, dtype=torch.float32) -> torch.Tensor:
    """Periodic Hann of win_length, zero-padded symmetrically to fft_size."""
    key = (fft_size, win_length, dtype)
    if key not in _WINDOW_CACHE:
        window = torch.hann_window(win_length, periodic=True, dtype=dtype)
        left = (fft_size - win_length) // 2
        full = torch.zeros(fft_size, dtype=dtype)
        full[left:left + win_length] = window
        _WINDOW_CACHE[key] = full
    return _WINDOW_CACHE[key]


def stft_magnitude(x: torch.Tensor, fft_size: int, hop: int, win_length: int) -> torch.Tensor:
    """Magnitude STFT of [B, T] (or [T]) signals, -> [B, frames, fft/2+1].

    Framing matches the numpy reference: center padding of fft_size//2
    (reflect, constant for very short signals) and frames = T//hop + 1.
    """
    squeeze = x.dim() == 1
    if squeeze:
        x = x.unsqueeze(0)
    if x.dim() != 2 or x.shape[1] < 1:
        raise ValueError(f"expected [B, T] samples, got {tuple(x.shape)}")
    n = x.shape[1]
    n_frames = n // hop + 1
    pad = fft_size // 2
    mode = "reflect" if n > pad else "constant"
    padded = F.pad(x.unsqueeze(1), (pad, pad), mode=mode).squeeze(1)

    frames = padded.unfold(1, fft_size, hop)[:, :n_frames]
    window = padded_hann(fft_size, win_length, dtype=x.dtype)
    spec = torch.fft.rfft(frames * window, n=fft_size, dim=2)
    mag = torch.abs(spec)
    return mag.squeeze(0) if squeeze else mag


def multi_res_spectral_loss(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Differentiable multi-resolution spectral distance, x as reference.

    Batched inputs give the mean of per-signal losses, so the value on a
    batch of one equals the numpy metric on that signal.
    """
    if x.dim() == 1:
        x, y = x.unsqueeze(0), y.unsqueeze(0)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    total = x.new_zeros(())
    for fft_size, hop, win in RESOLUTIONS:
        xm = stft_magnitude(x, fft_size, hop, win)
        ym = stft_magnitude(y, fft_size, hop, win)
        norm = torch.linalg.norm(xm, dim=(1, 2))
        sc = torch.linalg.norm(xm - ym, dim=(1, 2)) / torch.clamp(norm, min=1e-12)
        log_l1 = torch.mean(
            torch.abs(torch.log(xm + LOG_MAG_EPS) - torch.log(ym + LOG_MAG_EPS)),
            dim=(1, 2),
        )
        total = total + torch.mean(sc) + torch.mean(log_l1)
    return total


SQRT_HALF = math.sqrt(0.5)


def haar_dwt_channels(x: torch.Tensor) -> torch.Tensor:
    """Single-level orthonormal Haar split of [B, C, T] into [B, 2C, T/2].

    Approximation bands occupy the first C output channels, details the
    rest. Odd-length inputs are zero-padded on the right first; the
    transform itself preserves energy exactly.
    """
    if x.dim() != 3:
        raise ValueError(f"expected [B, C, T], got {tuple(x.shape)}")
    if x.shape[2] % 2 == 1:
        x = F.pad(x, (0, 1))
    even, odd = x[:, :, 0::2], x[:, :, 1::2]
    approx = (even + odd) * SQRT_HALF
    detail = (even - odd) * SQRT_HALF
    return torch.cat([approx, detail], dim=1)


def gaussian_kernel(size: int, sigma: float, dtype=torch.float32) -> torch.Tensor:
    offsets = torch.arange(size, dtype=dtype) - (size - 1) / 2.0
    kernel = torch.exp(-(offsets**2) / (2.0 * sigma**2))
    return kernel / kernel.sum()


def ssim_score(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Differentiable mean local SSIM of two equally shaped 2-D maps.

    Same window rules and constants as the numpy reference; callers
    normalize inputs to [0, 1] jointly beforehand.
    """
    if a.dim() != 2 or b.dim() != 2:
        raise ValueError("ssim_score expects 2-D matrices")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")

    size = min(WINDOW_SIZE, a.shape[0], a.shape[1])
    if size % 2 == 0:
        size -= 1
    kernel = gaussian_kernel(size, WINDOW_SIGMA, dtype=a.dtype)
    kernel_2d = torch.outer(kernel, kernel).unsqueeze(0).unsqueeze(0)

    stack = torch.stack([a, b, a * a, b * b, a * b]).unsqueeze(1)
    mu_a, mu_b, aa, bb, ab = F.conv2d(stack, kernel_2d).squeeze(1).unbind(0)
    var_a = aa - mu_a * mu_a
    var_b = bb - mu_b * mu_b
    cov = ab - mu_a * mu_b
    score = ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)) / (
        (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    )
    return score.mean()


def normalize_pair(a: torch.Tensor, b: torch.Tensor):
    """Jointly min-max normalize two tensors to [0, 1].

    A constant pair maps to all-zeros for both, so identical inputs still
    compare as identical.
    """
    low = torch.minimum(a.min(), b.min()).detach()
    high = torch.maximum(a.max(), b.max()).detach()
    span = torch.clamp(high - low, min=1e-8)
    return (a - low) / span, (b - low) / span
