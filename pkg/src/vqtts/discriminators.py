"""Adversarial critics over waveforms.

Two families: per-period critics that fold the waveform into a
[time/period x period] grid and convolve in 2-D, and per-scale critics that
look at the signal at original, half, and quarter resolution. Downsampling
between scales is an orthonormal Haar split into stacked subband channels,
never average pooling, so high-frequency content survives into the coarser
critics instead of being smoothed away.

Every forward returns both final score maps and per-layer feature maps; the
feature maps feed the feature-matching loss.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .dsp.audio_io import Waveform
from .nnops import haar_dwt_channels

PERIODS = (2, 3, 5, 7, 11)
LRELU_SLOPE = 0.1

# desk-scale widths, capped at 64 channels
PERIOD_CHANNELS = (8, 16, 32, 64)
SCALE_CHANNELS = (8, 16, 32, 64)


@dataclass
class DiscriminatorOutput:
    scores: list        # one score map per sub-discriminator
    features: list      # per sub-discriminator, the per-layer activations

    def __post_init__(self):
        if len(self.scores) != len(self.features):
            raise ValueError("need one feature-map list per score map")


def _as_batch(x) -> torch.Tensor:
    if isinstance(x, Waveform):
        x = torch.tensor(x.samples, dtype=torch.float32)
    if x.dim() == 1:
        x = x.unsqueeze(0)
    if x.dim() != 2 or x.shape[1] < 1:
        raise ValueError(f"expected [B, T] samples, got {tuple(x.shape)}")
    return x


def fold_period(x: torch.Tensor, period: int) -> torch.Tensor:
    """[B, T] -> [B, 1, ceil(T/period), period] with right padding."""
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    batch, length = x.shape
    remainder = length % period
    if remainder:
        pad = period - remainder
        mode = "reflect" if pad < length else "constant"
        x = F.pad(x.unsqueeze(1), (0, pad), mode=mode).squeeze(1)
    return x.reshape(batch, 1, -1, period)


class PeriodDiscriminator(nn.Module):
    """2-D conv stack over one period fold; kernels span time only."""

    def __init__(self, period: int):
        super().__init__()
        if period <= 0:
            raise ValueError(f"period must be positive, got {period}")
        self.period = period
        layers = []
        in_ch = 1
        for out_ch in PERIOD_CHANNELS:
            layers.append(nn.Conv2d(in_ch, out_ch, (5, 1), stride=(3, 1), padding=(2, 0)))
            in_ch = out_ch
        layers.append(nn.Conv2d(in_ch, in_ch, (5, 1), padding=(2, 0)))
        self.convs = nn.ModuleList(layers)
        self.post = nn.Conv2d(in_ch, 1, (3, 1), padding=(1, 0))

    def forward(self, x: torch.Tensor):
        h = fold_period(x, self.period)
        features = []
        for conv in self.convs:
            h = F.leaky_relu(conv(h), LRELU_SLOPE)
            features.append(h)
        return self.post(h), features


class MultiPeriodDiscriminator(nn.Module):
    def __init__(self, periods=PERIODS):
        super().__init__()
        self.periods = tuple(periods)
        self.critics = nn.ModuleList(PeriodDiscriminator(p) for p in self.periods)

    def forward(self, x) -> DiscriminatorOutput:
        x = _as_batch(x)
        scores, features = [], []
        for critic in self.critics:
            score, feats = critic(x)
            scores.append(score)
            features.append(feats)
        return DiscriminatorOutput(scores, features)


class ScaleDiscriminator(nn.Module):
    """1-D conv stack over a waveform or its stacked DWT subbands."""

    def __init__(self, in_channels: int):
        super().__init__()
        specs = [
            (SCALE_CHANNELS[0], 15, 1),
            (SCALE_CHANNELS[1], 21, 4),
            (SCALE_CHANNELS[2], 21, 4),
            (SCALE_CHANNELS[3], 21, 4),
            (SCALE_CHANNELS[3], 5, 1),
        ]
        layers = []
        in_ch = in_channels
        for out_ch, kernel, stride in specs:
            layers.append(nn.Conv1d(in_ch, out_ch, kernel, stride=stride, padding=kernel // 2))
            in_ch = out_ch
        self.convs = nn.ModuleList(layers)
        self.post = nn.Conv1d(in_ch, 1, 3, padding=1)

    def forward(self, h: torch.Tensor):
        features = []
        for conv in self.convs:
            h = F.leaky_relu(conv(h), LRELU_SLOPE)
            features.append(h)
        return self.post(h), features


class MultiScaleDiscriminator(nn.Module):
    """Critics at original, half, and quarter time resolution.

    The half-resolution critic sees one Haar split (2 subband channels), the
    quarter-resolution critic a cascade of two splits (4 channels).
    """

    def __init__(self):
        super().__init__()
        self.critics = nn.ModuleList(
            [ScaleDiscriminator(1), ScaleDiscriminator(2), ScaleDiscriminator(4)]
        )

    def forward(self, x) -> DiscriminatorOutput:
        x = _as_batch(x)
        if x.shape[1] < 4:
            raise ValueError("multi-scale critics need at least 4 samples")
        level0 = x.unsqueeze(1)
        level1 = haar_dwt_channels(level0)
        level2 = haar_dwt_channels(level1)
        scores, features = [], []
        for critic, inp in zip(self.critics, (level0, level1, level2)):
            score, feats = critic(inp)
            scores.append(score)
            features.append(feats)
        return DiscriminatorOutput(scores, features)


def conv_out_length(length: int, kernel: int, stride: int, padding: int) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def period_score_shape(length: int, period: int) -> tuple:
    """Shape law for one period critic's score map on a length-T input."""
    rows = -(-length // period)  # ceil
    for _ in PERIOD_CHANNELS:
        rows = conv_out_length(rows, 5, 3, 2)
    rows = conv_out_length(rows, 5, 1, 2)
    rows = conv_out_length(rows, 3, 1, 1)
    return (1, rows, period)


def scale_score_shape(length: int, level: int) -> tuple:
    """Shape law for one scale critic's score map; level counts Haar splits."""
    for _ in range(level):
        length = -(-length // 2)  # ceil: odd lengths are zero-padded
    length = conv_out_length(length, 15, 1, 7)
    for _ in range(3):
        length = conv_out_length(length, 21, 4, 10)
    length = conv_out_length(length, 5, 1, 2)
    length = conv_out_length(length, 3, 1, 1)
    return (1, length)
