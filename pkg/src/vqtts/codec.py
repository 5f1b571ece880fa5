"""Waveform codec: strided encoder, upsampling decoder, learned frame latents.

The encoder downsamples 24 kHz audio by factors whose product is 300, one
latent vector per 12.5 ms frame. The decoder mirrors it with transposed
convolutions and runs a bidirectional recurrent layer over the frame sequence
before upsampling. During codec warm-up the decoder also receives additive
taps from the first encoder blocks; those are switched off after warm-up and
at inference, when the decoder must live off quantized latents alone.

Length bookkeeping is exact, not approximate: every strided block maps
T -> T/f and every upsampling block maps T -> T*f, so decode(encode(x))
returns precisely the padded length of x.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .dsp.audio_io import CODEC_RATE_HZ, Waveform
from .quantizer import MultiStageQuantizer, QuantizerConfig

FRAME_HOP_MS = 12.5
LRELU_SLOPE = 0.1


@dataclass(frozen=True)
class CodecConfig:
    sample_rate_hz: int = CODEC_RATE_HZ
    downsample_factors: tuple = (5, 5, 4, 3)
    channels: tuple = (16, 32, 64, 128)
    latent_dim: int = 128
    lem_hidden: int = 128
    skip_block_count: int = 3
    recurrence: str = "lem"

    def __post_init__(self):
        product = math.prod(self.downsample_factors)
        expected = round(self.sample_rate_hz * FRAME_HOP_MS / 1000.0)
        if product != expected:
            raise ValueError(
                f"downsample factors multiply to {product}, need {expected} "
                f"samples per frame at {self.sample_rate_hz} Hz"
            )
        if len(self.channels) != len(self.downsample_factors):
            raise ValueError("need one channel width per downsampling block")
        if not 0 <= self.skip_block_count <= len(self.downsample_factors):
            raise ValueError(f"bad skip_block_count {self.skip_block_count}")
        if self.latent_dim < 1 or self.lem_hidden < 1:
            raise ValueError("latent_dim and lem_hidden must be positive")
        if self.recurrence not in ("lem", "gru"):
            raise ValueError(f"unknown recurrence kind {self.recurrence!r}")

    @property
    def frame_samples(self) -> int:
        return math.prod(self.downsample_factors)


@dataclass
class FrameRepresentation:
    """Frame-level latents, one row per 12.5 ms of source audio."""

    values: np.ndarray  # [frames x latent_dim]
    source_samples: int | None = None
    frame_hop_ms: float = FRAME_HOP_MS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError(f"values must be [frames x dim], got {self.values.shape}")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("frame representation contains non-finite values")
        if self.source_samples is not None:
            frame_samples = round(self.frame_hop_ms * CODEC_RATE_HZ / 1000.0)
            expected = math.ceil(self.source_samples / frame_samples)
            if self.values.shape[0] != expected:
                raise ValueError(
                    f"{self.values.shape[0]} frames inconsistent with "
                    f"{self.source_samples} source samples (expected {expected})"
                )

    @property
    def num_frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def latent_dim(self) -> int:
        return int(self.values.shape[1])


def pad_to_frame_multiple(samples: np.ndarray, frame_samples: int) -> np.ndarray:
    """Right-pad with zeros so the length divides evenly into frames."""
    remainder = samples.size % frame_samples
    if remainder == 0:
        return samples
    return np.pad(samples, (0, frame_samples - remainder))


class LemCell(nn.Module):
    """Two-gate multiscale recurrence over a pair of hidden states.

    Per-unit time step gates dt1/dt2 blend the previous states with tanh
    candidates; the second state update already sees the refreshed first
    state, which is what gives the layer its two time scales.
    """

    def __init__(self, input_dim: int, hidden_dim: int):
        super().__init__()
        self.gate1 = nn.Linear(input_dim + hidden_dim, hidden_dim)
        self.gate2 = nn.Linear(input_dim + hidden_dim, hidden_dim)
        self.candidate_z = nn.Linear(input_dim + hidden_dim, hidden_dim)
        self.candidate_y = nn.Linear(input_dim + hidden_dim, hidden_dim)

    def forward(self, u, y, z):
        uy = torch.cat([u, y], dim=-1)
        dt1 = torch.sigmoid(self.gate1(uy))
        dt2 = torch.sigmoid(self.gate2(uy))
        z_new = (1.0 - dt1) * z + dt1 * torch.tanh(self.candidate_z(uy))
        uz = torch.cat([u, z_new], dim=-1)
        y_new = (1.0 - dt2) * y + dt2 * torch.tanh(self.candidate_y(uz))
        return y_new, z_new


class GruCellAdapter(nn.Module):
    """Single-gate substitute behind the same (u, y, z) -> (y, z) interface."""

    def __init__(self, input_dim: int, hidden_dim: int):
        super().__init__()
        self.cell = nn.GRUCell(input_dim, hidden_dim)

    def forward(self, u, y, z):
        return self.cell(u, y), z


class BidirectionalRecurrent(nn.Module):
    """Sum-combined bidirectional scan with one shared cell.

    Both directions run the same cell, so reversing the input sequence and
    reversing the output is exactly the same map as the layer itself. Output
    is input plus a projection of the combined states (length-preserving,
    width-preserving).
    """

    def __init__(self, dim: int, hidden_dim: int, kind: str = "lem"):
        super().__init__()
        if kind == "lem":
            self.cell = LemCell(dim, hidden_dim)
        elif kind == "gru":
            self.cell = GruCellAdapter(dim, hidden_dim)
        else:
            raise ValueError(f"unknown recurrence kind {kind!r}")
        self.hidden_dim = hidden_dim
        self.proj = nn.Linear(hidden_dim, dim)

    def _scan(self, seq: torch.Tensor) -> torch.Tensor:
        batch = seq.shape[0]
        y = seq.new_zeros(batch, self.hidden_dim)
        z = seq.new_zeros(batch, self.hidden_dim)
        states = []
        for t in range(seq.shape[1]):
            y, z = self.cell(seq[:, t], y, z)
            states.append(y)
        return torch.stack(states, dim=1)

    def forward(self, seq: torch.Tensor) -> torch.Tensor:
        if seq.dim() != 3 or seq.shape[1] < 1:
            raise ValueError(f"expected [B, T, d] with T >= 1, got {tuple(seq.shape)}")
        forward_states = self._scan(seq)
        backward_states = self._scan(seq.flip(1)).flip(1)
        return seq + self.proj(forward_states + backward_states)


class ResidualUnit(nn.Module):
    def __init__(self, channels: int, dilation: int = 1):
        super().__init__()
        self.conv_dilated = nn.Conv1d(
            channels, channels, 3, padding=dilation, dilation=dilation
        )
        self.conv_point = nn.Conv1d(channels, channels, 1)

    def forward(self, x):
        h = self.conv_dilated(F.leaky_relu(x, LRELU_SLOPE))
        h = self.conv_point(F.leaky_relu(h, LRELU_SLOPE))
        return x + h


class DownBlock(nn.Module):
    """Residual unit then a strided conv mapping T -> T/factor exactly."""

    def __init__(self, in_channels: int, out_channels: int, factor: int):
        super().__init__()
        self.factor = factor
        self.res = ResidualUnit(in_channels)
        self.down = nn.Conv1d(in_channels, out_channels, 2 * factor, stride=factor)

    def forward(self, x):
        x = self.res(x)
        # asymmetric pad of f samples makes (T + f - 2f)/f + 1 == T/f
        left = self.factor // 2
        x = F.pad(x, (left, self.factor - left))
        return self.down(F.leaky_relu(x, LRELU_SLOPE))


class UpBlock(nn.Module):
    """Transposed conv mapping T -> T*factor exactly, then residual units."""

    def __init__(self, in_channels: int, out_channels: int, factor: int):
        super().__init__()
        self.up = nn.ConvTranspose1d(
            in_channels, out_channels, 3 * factor, stride=factor, padding=factor
        )
        self.res1 = ResidualUnit(out_channels, dilation=1)
        self.res2 = ResidualUnit(out_channels, dilation=3)

    def forward(self, x):
        x = self.up(F.leaky_relu(x, LRELU_SLOPE))
        return self.res2(self.res1(x))


class Encoder(nn.Module):
    def __init__(self, cfg: CodecConfig):
        super().__init__()
        self.cfg = cfg
        channels = list(cfg.channels)
        outs = channels[1:] + [channels[-1]]
        self.pre = nn.Conv1d(1, channels[0], 7, padding=3)
        self.blocks = nn.ModuleList(
            DownBlock(channels[i], outs[i], f)
            for i, f in enumerate(cfg.downsample_factors)
        )
        self.proj = nn.Conv1d(outs[-1], cfg.latent_dim, 3, padding=1)

    def forward(self, x: torch.Tensor):
        """[B, T] samples -> ([B, frames, latent_dim], skip taps).

        T must be a multiple of the total downsampling factor; taps are the
        outputs of the first ``skip_block_count`` blocks.
        """
        if x.dim() != 2:
            raise ValueError(f"expected [B, T] samples, got {tuple(x.shape)}")
        if x.shape[1] % self.cfg.frame_samples != 0:
            raise ValueError(
                f"length {x.shape[1]} is not a multiple of {self.cfg.frame_samples}"
            )
        h = self.pre(x.unsqueeze(1))
        taps = []
        for i, block in enumerate(self.blocks):
            h = block(h)
            if i < self.cfg.skip_block_count:
                taps.append(h)
        latents = self.proj(F.leaky_relu(h, LRELU_SLOPE))
        return latents.transpose(1, 2), taps


class Decoder(nn.Module):
    def __init__(self, cfg: CodecConfig):
        super().__init__()
        self.cfg = cfg
        widths = [cfg.channels[-1]] + list(reversed(cfg.channels))
        self.pre = nn.Conv1d(cfg.latent_dim, widths[0], 7, padding=3)
        self.recurrent = BidirectionalRecurrent(widths[0], cfg.lem_hidden, cfg.recurrence)
        self.blocks = nn.ModuleList(
            UpBlock(widths[j], widths[j + 1], f)
            for j, f in enumerate(reversed(cfg.downsample_factors))
        )
        self.post = nn.Conv1d(widths[-1], 1, 7, padding=3)

    def forward(self, latents: torch.Tensor, taps=None) -> torch.Tensor:
        """[B, frames, latent_dim] (+ optional encoder taps) -> [B, T] waveform."""
        if latents.dim() != 3 or latents.shape[2] != self.cfg.latent_dim:
            raise ValueError(
                f"expected [B, frames, {self.cfg.latent_dim}], got {tuple(latents.shape)}"
            )
        n_blocks = len(self.blocks)
        h = self.pre(latents.transpose(1, 2))
        h = self.recurrent(h.transpose(1, 2)).transpose(1, 2)
        for j, block in enumerate(self.blocks):
            h = block(h)
            if taps is not None:
                tap_index = n_blocks - 2 - j
                if 0 <= tap_index < len(taps):
                    h = h + taps[tap_index]
        wave = torch.tanh(self.post(F.leaky_relu(h, LRELU_SLOPE)))
        return wave.squeeze(1)


@dataclass
class CodecForward:
    reconstruction: torch.Tensor   # [B, T]
    latents: torch.Tensor          # [B, frames, dim] pre-quantization
    quantized: torch.Tensor        # [B, frames, dim] straight-through
    indices: torch.Tensor | None   # [B, frames, S]
    codebook_loss: torch.Tensor
    commitment_loss: torch.Tensor


class CodecModel(nn.Module):
    """Encoder + quantizer + decoder with a runtime skip switch."""

    def __init__(self, cfg: CodecConfig, qcfg: QuantizerConfig | None = None, seed: int = 0):
        super().__init__()
        if qcfg is not None and qcfg.dim != cfg.latent_dim:
            raise ValueError(
                f"quantizer dim {qcfg.dim} does not match latent_dim {cfg.latent_dim}"
            )
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.decoder = Decoder(cfg)
        self.quantizer = MultiStageQuantizer(qcfg, seed=seed) if qcfg is not None else None
        self.register_buffer("skips_enabled", torch.tensor(True))

    def forward(self, x: torch.Tensor) -> CodecForward:
        latents, taps = self.encoder(x)
        if self.quantizer is not None:
            quantized, indices, codebook_loss, commitment_loss = self.quantizer(latents)
        else:
            quantized, indices = latents, None
            codebook_loss = x.new_zeros(())
            commitment_loss = x.new_zeros(())
        recon = self.decoder(quantized, taps if bool(self.skips_enabled) else None)
        return CodecForward(recon, latents, quantized, indices, codebook_loss, commitment_loss)

    @torch.no_grad()
    def encode_wave(self, wave: Waveform) -> FrameRepresentation:
        """Waveform -> pre-quantization frame latents (inference path)."""
        if wave.sample_rate_hz != self.cfg.sample_rate_hz:
            raise ValueError(
                f"expected {self.cfg.sample_rate_hz} Hz input, got {wave.sample_rate_hz}"
            )
        padded = pad_to_frame_multiple(wave.samples, self.cfg.frame_samples)
        x = torch.tensor(padded, dtype=torch.float32).unsqueeze(0)
        was_training = self.training
        self.eval()
        latents, _ = self.encoder(x)
        if was_training:
            self.train()
        return FrameRepresentation(
            latents.squeeze(0).numpy(), source_samples=wave.num_samples
        )

    @torch.no_grad()
    def decode_frames(self, repr_: FrameRepresentation) -> Waveform:
        """Frame latents -> waveform, trimmed back to the source length."""
        if repr_.latent_dim != self.cfg.latent_dim:
            raise ValueError(
                f"representation dim {repr_.latent_dim} != latent_dim {self.cfg.latent_dim}"
            )
        latents = torch.tensor(repr_.values, dtype=torch.float32).unsqueeze(0)
        was_training = self.training
        self.eval()
        wave = self.decoder(latents, taps=None).squeeze(0).numpy().astype(np.float64)
        if was_training:
            self.train()
        if repr_.source_samples is not None:
            wave = wave[: repr_.source_samples]
        return Waveform(wave, self.cfg.sample_rate_hz)


def toggle_skips(model: CodecModel, enabled: bool) -> None:
    """Connect or disconnect the encoder-to-decoder warm-up taps."""
    model.skips_enabled.fill_(bool(enabled))
