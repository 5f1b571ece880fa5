"""Multi-stage residual vector quantization.

Each frame is quantized in stages: stage s snaps the running residual to its
nearest codebook entry and the next stage sees what is left. Index 0 of every
stage is a frozen zero vector, so a stage can always decline to add anything;
that is what makes residual norms non-increasing by construction rather than
by hope.

The functional numpy ops here are the reference semantics; the torch
``MultiStageQuantizer`` is the trainable twin (straight-through gradients,
EMA codebook maintenance, k-means++ init, dead-code revival).
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

CODESTREAM_MAGIC = b"VQCS"
CODESTREAM_VERSION = 1
_HEADER = struct.Struct("<4sHHIIdI")  # magic, version, S, K, dim, frame_rate, frames

# rows whose EMA mass falls below this keep their previous value
EMA_EPS = 1e-12

# batches a row may go unassigned before it is re-seeded from live data
REVIVAL_PATIENCE = 1000


@dataclass(frozen=True)
class QuantizerConfig:
    num_stages: int = 16
    codebook_size: int = 1024
    dim: int = 128
    ema_decay: float = 0.99
    commitment_beta: float = 0.25
    frame_rate_hz: float = 80.0

    def __post_init__(self):
        # num_stages 0 is allowed so a zero-stage config can still be rated
        # (0 bps); an actual quantizer instance requires at least one stage.
        if self.num_stages < 0:
            raise ValueError(f"num_stages must be >= 0, got {self.num_stages}")
        if self.codebook_size < 2:
            raise ValueError(f"codebook_size must be >= 2, got {self.codebook_size}")
        if self.codebook_size > 65536:
            raise ValueError("codebook_size above 65536 does not fit uint16 streams")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not 0.0 < self.ema_decay < 1.0:
            raise ValueError(f"ema_decay must lie in (0, 1), got {self.ema_decay}")
        if self.commitment_beta < 0:
            raise ValueError(f"commitment_beta must be >= 0, got {self.commitment_beta}")
        if self.frame_rate_hz <= 0:
            raise ValueError(f"frame_rate_hz must be positive, got {self.frame_rate_hz}")


def bitrate_bps(cfg: QuantizerConfig) -> float:
    """frame_rate * stages * log2(codebook size)."""
    if cfg.num_stages == 0:
        return 0.0
    return cfg.frame_rate_hz * cfg.num_stages * math.log2(cfg.codebook_size)


@dataclass
class VqLossTerms:
    codebook_loss: float
    commitment_loss: float

    def __post_init__(self):
        if self.codebook_loss < 0 or self.commitment_loss < 0:
            raise ValueError("vq loss terms are sums of squares and cannot be negative")


@dataclass
class CodeStream:
    """Per-frame, per-stage code indices plus the config that produced them."""

    indices: np.ndarray  # [frames x S] integer
    config: QuantizerConfig

    def __post_init__(self):
        self.indices = np.asarray(self.indices)
        if self.indices.ndim != 2 or self.indices.shape[1] != self.config.num_stages:
            raise ValueError(
                f"indices must be [frames x {self.config.num_stages}], got {self.indices.shape}"
            )
        if self.indices.size and (
            int(self.indices.min()) < 0 or int(self.indices.max()) >= self.config.codebook_size
        ):
            raise ValueError("code index out of range")
        self.indices = self.indices.astype(np.uint16)

    @property
    def num_frames(self) -> int:
        return int(self.indices.shape[0])

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(
            CODESTREAM_MAGIC,
            CODESTREAM_VERSION,
            self.config.num_stages,
            self.config.codebook_size,
            self.config.dim,
            self.config.frame_rate_hz,
            self.num_frames,
        )
        body = np.ascontiguousarray(self.indices, dtype="<u2").tobytes()
        return header + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CodeStream":
        if len(blob) < _HEADER.size:
            raise ValueError("code stream truncated before header end")
        magic, version, s, k, dim, frame_rate, frames = _HEADER.unpack_from(blob)
        if magic != CODESTREAM_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != CODESTREAM_VERSION:
            raise ValueError(f"unsupported code stream version {version}")
        expected = _HEADER.size + 2 * frames * s
        if len(blob) != expected:
            raise ValueError(f"code stream length {len(blob)} != expected {expected}")
        indices = np.frombuffer(blob, dtype="<u2", offset=_HEADER.size).reshape(frames, s)
        cfg = QuantizerConfig(num_stages=s, codebook_size=k, dim=dim, frame_rate_hz=frame_rate)
        return cls(indices.copy(), cfg)

    def write(self, path) -> None:
        with open(path, "wb") as handle:
            handle.write(self.to_bytes())

    @classmethod
    def read(cls, path) -> "CodeStream":
        with open(path, "rb") as handle:
            return cls.from_bytes(handle.read())


def nearest_code(vec: np.ndarray, codebook: np.ndarray):
    """(index, code) of the codebook row closest to vec in squared distance.

    Ties break toward the smallest index.
    """
    codebook = np.asarray(codebook, dtype=np.float64)
    vec = np.asarray(vec, dtype=np.float64)
    if codebook.ndim != 2 or codebook.shape[0] == 0:
        raise ValueError("codebook must be a non-empty [K x dim] matrix")
    if vec.shape != (codebook.shape[1],):
        raise ValueError(f"vector dim {vec.shape} does not match codebook {codebook.shape}")
    dist = np.sum((codebook - vec) ** 2, axis=1)
    index = int(np.argmin(dist))  # argmin returns the first minimum
    return index, codebook[index].copy()


def msvq_quantize(frame: np.ndarray, cfg: QuantizerConfig, codebooks: np.ndarray):
    """Greedy residual quantization of one frame through every stage.

    Returns (indices [S], quantized [dim], residual_norms [S+1]) where
    residual_norms[s] is the residual magnitude entering stage s.
    """
    frame = np.asarray(frame, dtype=np.float64)
    codebooks = np.asarray(codebooks, dtype=np.float64)
    if frame.shape != (cfg.dim,):
        raise ValueError(f"frame shape {frame.shape} does not match dim {cfg.dim}")
    if codebooks.shape != (cfg.num_stages, cfg.codebook_size, cfg.dim):
        raise ValueError(f"codebooks shape {codebooks.shape} does not match config")

    indices = np.zeros(cfg.num_stages, dtype=np.int64)
    quantized = np.zeros(cfg.dim)
    norms = np.zeros(cfg.num_stages + 1)
    residual = frame.copy()
    for s in range(cfg.num_stages):
        norms[s] = np.linalg.norm(residual)
        idx, code = nearest_code(residual, codebooks[s])
        indices[s] = idx
        quantized += code
        residual -= code
    norms[cfg.num_stages] = np.linalg.norm(residual)
    return indices, quantized, norms


def vq_loss(input_frames: np.ndarray, quantized: np.ndarray, beta: float) -> VqLossTerms:
    """Codebook and commitment terms, averaged over frames.

    Per frame the terms are sums of squares over the feature dimension;
    gradient stops are meaningless on numpy arrays, so this is the value-side
    reference (the torch module applies the stops).
    """
    input_frames = np.atleast_2d(np.asarray(input_frames, dtype=np.float64))
    quantized = np.atleast_2d(np.asarray(quantized, dtype=np.float64))
    if input_frames.shape != quantized.shape:
        raise ValueError(f"shape mismatch: {input_frames.shape} vs {quantized.shape}")
    per_frame = np.sum((input_frames - quantized) ** 2, axis=-1)
    codebook = float(np.mean(per_frame))
    return VqLossTerms(codebook_loss=codebook, commitment_loss=beta * codebook)


def ema_update(
    codebook: np.ndarray,
    ema_counts: np.ndarray,
    ema_sums: np.ndarray,
    vectors: np.ndarray,
    assignments: np.ndarray,
    decay: float,
    freeze_zero: bool = True,
):
    """One EMA step for a single stage given a batch of assigned vectors.

    Returns (codebook', counts', sums'). Rows with no vectors this batch keep
    their value exactly; row 0 stays frozen at zero when reserved.
    """
    codebook = np.asarray(codebook, dtype=np.float64)
    k = codebook.shape[0]
    vectors = np.asarray(vectors, dtype=np.float64)
    assignments = np.asarray(assignments)

    batch_counts = np.bincount(assignments, minlength=k).astype(np.float64)
    batch_sums = np.zeros_like(codebook)
    np.add.at(batch_sums, assignments, vectors)

    counts = decay * np.asarray(ema_counts, dtype=np.float64) + (1 - decay) * batch_counts
    sums = decay * np.asarray(ema_sums, dtype=np.float64) + (1 - decay) * batch_sums

    new_codebook = codebook.copy()
    active = (batch_counts > 0) & (counts > EMA_EPS)
    if freeze_zero:
        active[0] = False
        counts[0] = 0.0
        sums[0] = 0.0
    new_codebook[active] = sums[active] / counts[active, None]
    return new_codebook, counts, sums


def straight_through(input_t: torch.Tensor, quantized_t: torch.Tensor) -> torch.Tensor:
    """Forward the quantized value, backward the identity.

    The returned tensor equals ``quantized_t`` elementwise while its gradient
    with respect to ``input_t`` is exactly the identity.
    """
    if input_t.shape != quantized_t.shape:
        raise ValueError(f"shape mismatch: {input_t.shape} vs {quantized_t.shape}")
    # (input - input.detach()) is exactly zero, so the forward value is the
    # quantized tensor bit for bit; the gradient path sees only the identity.
    return quantized_t.detach() + (input_t - input_t.detach())


def kmeans_pp_seeds(points: torch.Tensor, num_seeds: int, generator: torch.Generator) -> torch.Tensor:
    """k-means++ seeding: spread seeds by squared-distance-weighted sampling.

    With fewer points than seeds the extras are uniform re-draws, which the
    dead-code revival path cleans up during training.
    """
    n = points.shape[0]
    seeds = torch.empty(num_seeds, points.shape[1], dtype=points.dtype)
    first = int(torch.randint(n, (1,), generator=generator))
    seeds[0] = points[first]
    closest = torch.sum((points - seeds[0]) ** 2, dim=1)
    for j in range(1, num_seeds):
        total = float(closest.sum())
        if total <= 0:
            pick = int(torch.randint(n, (1,), generator=generator))
        else:
            pick = int(torch.multinomial(closest, 1, generator=generator))
        seeds[j] = points[pick]
        closest = torch.minimum(closest, torch.sum((points - seeds[j]) ** 2, dim=1))
    return seeds


class MultiStageQuantizer(nn.Module):
    """Trainable multi-stage quantizer with EMA codebook maintenance.

    Codebooks are buffers, not parameters: gradient descent never touches
    them, EMA statistics do. The first training batch initializes every stage
    with k-means++ on its residuals.
    """

    def __init__(self, cfg: QuantizerConfig, seed: int = 0):
        super().__init__()
        if cfg.num_stages < 1:
            raise ValueError("a quantizer instance needs at least one stage")
        self.cfg = cfg
        s, k, d = cfg.num_stages, cfg.codebook_size, cfg.dim
        self.register_buffer("codebooks", torch.zeros(s, k, d))
        self.register_buffer("ema_counts", torch.zeros(s, k))
        self.register_buffer("ema_sums", torch.zeros(s, k, d))
        self.register_buffer("unused_batches", torch.zeros(s, k, dtype=torch.long))
        self.register_buffer("initialized", torch.tensor(False))
        self._generator = torch.Generator()
        self._generator.manual_seed(seed)

    # generator state must survive checkpoint round-trips
    def get_extra_state(self):
        return {"generator": self._generator.get_state()}

    def set_extra_state(self, state):
        self._generator.set_state(state["generator"])

    def init_codebooks(self, frames: torch.Tensor) -> None:
        """k-means++ init of every stage from one batch of encoder outputs."""
        residual = frames.detach().to(self.codebooks.dtype)
        with torch.no_grad():
            for s in range(self.cfg.num_stages):
                seeds = kmeans_pp_seeds(
                    residual, self.cfg.codebook_size - 1, self._generator
                )
                self.codebooks[s, 0] = 0.0
                self.codebooks[s, 1:] = seeds
                indices = self._stage_lookup(residual, s)
                residual = residual - self.codebooks[s][indices]
            self.initialized.fill_(True)

    def _stage_lookup(self, residual: torch.Tensor, stage: int) -> torch.Tensor:
        book = self.codebooks[stage]
        dist = (
            torch.sum(residual**2, dim=1, keepdim=True)
            - 2.0 * residual @ book.T
            + torch.sum(book**2, dim=1)
        )
        return torch.argmin(dist, dim=1)

    def forward(self, frames: torch.Tensor):
        """Quantize [..., dim] frames.

        Returns (quantized, indices, codebook_loss, commitment_loss) where
        quantized carries straight-through gradients and commitment_loss is
        the only differentiable loss term (codebooks are EMA-maintained).
        """
        if frames.shape[-1] != self.cfg.dim:
            raise ValueError(f"expected feature dim {self.cfg.dim}, got {frames.shape[-1]}")
        lead_shape = frames.shape[:-1]
        flat = frames.reshape(-1, self.cfg.dim)

        if not bool(self.initialized):
            if not self.training:
                raise RuntimeError("quantizer codebooks are not initialized")
            self.init_codebooks(flat)

        residual = flat.detach()
        quantized = torch.zeros_like(residual)
        indices = torch.empty(flat.shape[0], self.cfg.num_stages, dtype=torch.long)
        for s in range(self.cfg.num_stages):
            idx = self._stage_lookup(residual, s)
            indices[:, s] = idx
            if self.training:
                self._ema_step(residual, idx, s)
            code = self.codebooks[s][idx]
            quantized = quantized + code
            residual = residual - code

        codebook_loss = torch.mean(torch.sum((flat.detach() - quantized) ** 2, dim=1))
        commitment_loss = self.cfg.commitment_beta * torch.mean(
            torch.sum((flat - quantized.detach()) ** 2, dim=1)
        )
        out = straight_through(flat, quantized)
        return (
            out.reshape(*lead_shape, self.cfg.dim),
            indices.reshape(*lead_shape, self.cfg.num_stages),
            codebook_loss,
            commitment_loss,
        )

    @torch.no_grad()
    def _ema_step(self, residual: torch.Tensor, indices: torch.Tensor, stage: int) -> None:
        k = self.cfg.codebook_size
        decay = self.cfg.ema_decay
        batch_counts = torch.bincount(indices, minlength=k).to(residual.dtype)
        batch_sums = torch.zeros_like(self.ema_sums[stage])
        batch_sums.index_add_(0, indices, residual)

        self.ema_counts[stage].mul_(decay).add_(batch_counts, alpha=1 - decay)
        self.ema_sums[stage].mul_(decay).add_(batch_sums, alpha=1 - decay)

        active = (batch_counts > 0) & (self.ema_counts[stage] > EMA_EPS)
        active[0] = False  # reserved zero row never moves
        self.ema_counts[stage, 0] = 0.0
        self.ema_sums[stage, 0] = 0.0
        if active.any():
            self.codebooks[stage][active] = (
                self.ema_sums[stage][active] / self.ema_counts[stage][active].unsqueeze(1)
            )

        # dead-code accounting and revival from live residuals
        used = batch_counts > 0
        self.unused_batches[stage][used] = 0
        self.unused_batches[stage][~used] += 1
        self.unused_batches[stage, 0] = 0
        dead = torch.nonzero(self.unused_batches[stage] >= REVIVAL_PATIENCE).flatten()
        for row in dead.tolist():
            pick = int(torch.randint(residual.shape[0], (1,), generator=self._generator))
            seed_vec = residual[pick]
            self.codebooks[stage, row] = seed_vec
            self.ema_counts[stage, row] = 1.0
            self.ema_sums[stage, row] = seed_vec
            self.unused_batches[stage, row] = 0

    @torch.no_grad()
    def encode(self, frames: torch.Tensor) -> CodeStream:
        """Quantize [frames x dim] to a serializable index stream."""
        if not bool(self.initialized):
            raise RuntimeError("quantizer codebooks are not initialized")
        residual = frames.detach().reshape(-1, self.cfg.dim).to(self.codebooks.dtype)
        columns = []
        for s in range(self.cfg.num_stages):
            idx = self._stage_lookup(residual, s)
            columns.append(idx)
            residual = residual - self.codebooks[s][idx]
        indices = torch.stack(columns, dim=1).numpy()
        return CodeStream(indices, self.cfg)

    @torch.no_grad()
    def decode(self, stream: CodeStream) -> torch.Tensor:
        """Rebuild [frames x dim] quantized vectors from an index stream."""
        if stream.config.num_stages != self.cfg.num_stages or (
            stream.config.codebook_size != self.cfg.codebook_size
            or stream.config.dim != self.cfg.dim
        ):
            raise ValueError("code stream config does not match this quantizer")
        indices = torch.from_numpy(stream.indices.astype(np.int64))
        out = torch.zeros(indices.shape[0], self.cfg.dim, dtype=self.codebooks.dtype)
        for s in range(self.cfg.num_stages):
            out += self.codebooks[s][indices[:, s]]
        return out
