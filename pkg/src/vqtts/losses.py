"""Training objectives and the per-step loss report.

The report stores plain Python floats and its composite fields are defined
as exact sums of their parts, in a fixed order. Serialization goes through
JSON's shortest-round-trip float encoding, so the decomposition identities
survive a write/read cycle bit for bit; the constructor re-checks them on
every build and every parse.
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields

import torch

from .nnops import multi_res_spectral_loss, normalize_pair, ssim_score


@dataclass(frozen=True)
class LossWeights:
    w_G: float = 1.0
    w_AM: float = 1.0

    def __post_init__(self):
        if self.w_G <= 0 or self.w_AM <= 0:
            raise ValueError("loss weights must be positive")


@dataclass(frozen=True)
class GeneratorSubWeights:
    """Internal scaling of the four codec-loss terms.

    Defaults of 1 everywhere keep the total an unweighted sum; the
    45-style spectral-loss boost some vocoder recipes use stays off unless
    configured.
    """

    adv: float = 1.0
    vq: float = 1.0
    fm: float = 1.0
    mrs: float = 1.0


@dataclass
class LossReport:
    step: int
    phase: str
    l_adv: float = 0.0
    l_vq: float = 0.0
    l_fm: float = 0.0
    l_mrs: float = 0.0
    l_G: float = 0.0
    l_pitch: float = 0.0
    l_dur: float = 0.0
    l_utt: float = 0.0
    l_phone: float = 0.0
    l_ssim: float = 0.0
    l_feat: float = 0.0
    l_AM: float = 0.0
    w_G: float = 1.0
    w_AM: float = 1.0
    l_joint: float = 0.0
    d_sub: dict = field(default_factory=dict)

    def __post_init__(self):
        values = asdict(self)
        for name, value in values.items():
            if name in ("step", "phase", "d_sub"):
                continue
            if not math.isfinite(value):
                raise ValueError(f"{name} is not finite: {value}")
        for value in self.d_sub.values():
            if not math.isfinite(value):
                raise ValueError("non-finite sub-critic loss")
        for name in ("l_vq", "l_fm", "l_mrs", "l_pitch", "l_dur", "l_utt",
                     "l_phone", "l_ssim", "l_feat"):
            if values[name] < 0:
                raise ValueError(f"{name} must be >= 0, got {values[name]}")
        if self.l_G != self.l_adv + self.l_vq + self.l_fm + self.l_mrs:
            raise ValueError("l_G does not equal the sum of its four terms")
        if self.l_AM != (
            self.l_pitch + self.l_dur + self.l_utt
            + self.l_phone + self.l_ssim + self.l_feat
        ):
            raise ValueError("l_AM does not equal the sum of its six terms")
        if self.l_joint != self.w_G * self.l_G + self.w_AM * self.l_AM:
            raise ValueError("l_joint does not equal the weighted sum")

    @classmethod
    def build(cls, step, phase, *, l_adv=0.0, l_vq=0.0, l_fm=0.0, l_mrs=0.0,
              l_pitch=0.0, l_dur=0.0, l_utt=0.0, l_phone=0.0, l_ssim=0.0,
              l_feat=0.0, weights=LossWeights(), d_sub=None):
        """Assemble a report, computing the composite fields in fixed order."""
        l_G = l_adv + l_vq + l_fm + l_mrs
        l_AM = l_pitch + l_dur + l_utt + l_phone + l_ssim + l_feat
        l_joint = weights.w_G * l_G + weights.w_AM * l_AM
        return cls(
            step=step, phase=phase,
            l_adv=l_adv, l_vq=l_vq, l_fm=l_fm, l_mrs=l_mrs, l_G=l_G,
            l_pitch=l_pitch, l_dur=l_dur, l_utt=l_utt, l_phone=l_phone,
            l_ssim=l_ssim, l_feat=l_feat, l_AM=l_AM,
            w_G=weights.w_G, w_AM=weights.w_AM, l_joint=l_joint,
            d_sub=dict(d_sub or {}),
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "LossReport":
        data = json.loads(line)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown loss report fields: {sorted(unknown)}")
        return cls(**data)


def append_report(path, report: LossReport) -> None:
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(report.to_json() + "\n")


def read_reports(path):
    with open(path, encoding="utf-8") as handle:
        return [LossReport.from_json(line) for line in handle if line.strip()]


def adversarial_losses(real_scores, fake_scores):
    """Least-squares GAN objectives summed over sub-critics.

    d_loss drives real score maps to 1 and fake to 0; g_loss drives fake
    to 1. Callers detach the fake scores for the discriminator step.
    """
    if len(real_scores) != len(fake_scores):
        raise ValueError(
            f"sub-critic count mismatch: {len(real_scores)} vs {len(fake_scores)}"
        )
    if not real_scores:
        raise ValueError("need at least one sub-critic")
    d_loss = real_scores[0].new_zeros(())
    g_loss = fake_scores[0].new_zeros(())
    for real, fake in zip(real_scores, fake_scores):
        d_loss = d_loss + torch.mean((real - 1.0) ** 2) + torch.mean(fake**2)
        g_loss = g_loss + torch.mean((fake - 1.0) ** 2)
    return d_loss, g_loss


def per_critic_discriminator_losses(real_scores, fake_scores):
    """The d_loss of adversarial_losses, itemized per sub-critic."""
    if len(real_scores) != len(fake_scores):
        raise ValueError("sub-critic count mismatch")
    return [
        torch.mean((real - 1.0) ** 2) + torch.mean(fake**2)
        for real, fake in zip(real_scores, fake_scores)
    ]


def feature_match_loss(real_features, fake_features):
    """Mean |real - fake| per layer, summed over layers and sub-critics."""
    if len(real_features) != len(fake_features):
        raise ValueError("sub-critic count mismatch")
    total = None
    for real_layers, fake_layers in zip(real_features, fake_features):
        if len(real_layers) != len(fake_layers):
            raise ValueError("layer count mismatch")
        for real, fake in zip(real_layers, fake_layers):
            if real.shape != fake.shape:
                raise ValueError(
                    f"feature shape mismatch: {tuple(real.shape)} vs {tuple(fake.shape)}"
                )
            term = torch.mean(torch.abs(real - fake))
            total = term if total is None else total + term
    if total is None:
        raise ValueError("no features to match")
    return total


def codec_generator_loss(l_adv, l_vq, l_fm, l_mrs, sub_weights=GeneratorSubWeights()):
    """The four-term codec objective; defaults keep it an unweighted sum."""
    return (
        sub_weights.adv * l_adv
        + sub_weights.vq * l_vq
        + sub_weights.fm * l_fm
        + sub_weights.mrs * l_mrs
    )


def joint_loss(l_G, l_AM, weights: LossWeights):
    return weights.w_G * l_G + weights.w_AM * l_AM


def spectral_reconstruction_loss(real_wave, fake_wave):
    """Differentiable multi-resolution spectral term, real as reference."""
    return multi_res_spectral_loss(real_wave, fake_wave)


def _l1(pred, target):
    return torch.mean(torch.abs(pred - target))


def acoustic_model_loss(
    pred_pitch, pred_log_dur, pred_utt, pred_phone, pred_repr,
    target_pitch, target_dur_frames, target_utt, target_phone, target_repr,
):
    """Six-term acoustic-model objective for one utterance.

    Phone-level terms are L1 over phones; durations compare in log(1+frames)
    so predictors output log durations directly while data carries integer
    frame counts. The structural term is 1 - ssim on the jointly normalized
    representation pair, the auxiliary term plain L1 on representations.

    Returns (total, parts) with parts a dict of the six scalar tensors in
    canonical order.
    """
    if pred_pitch.shape != target_pitch.shape:
        raise ValueError("pitch shape mismatch")
    if pred_log_dur.shape != target_dur_frames.shape:
        raise ValueError("duration shape mismatch")
    if pred_log_dur.shape != pred_pitch.shape:
        raise ValueError("pitch and duration must align per phone")
    if pred_utt.shape != target_utt.shape:
        raise ValueError("utterance condition shape mismatch")
    if pred_phone.shape != target_phone.shape:
        raise ValueError("phone condition shape mismatch")
    if pred_phone.shape[0] != pred_pitch.shape[0]:
        raise ValueError("phone condition rows must align per phone")
    if pred_repr.shape != target_repr.shape:
        raise ValueError("representation shape mismatch")

    parts = {
        "l_pitch": _l1(pred_pitch, target_pitch),
        "l_dur": _l1(pred_log_dur, torch.log1p(target_dur_frames.to(pred_log_dur.dtype))),
        "l_utt": _l1(pred_utt, target_utt),
        "l_phone": _l1(pred_phone, target_phone),
        "l_ssim": 1.0 - ssim_score(*normalize_pair(pred_repr, target_repr)),
        "l_feat": _l1(pred_repr, target_repr),
    }
    total = parts["l_pitch"] + parts["l_dur"] + parts["l_utt"]
    total = total + parts["l_phone"] + parts["l_ssim"] + parts["l_feat"]
    return total, parts


def masked_frame_l1(pred, target, lengths):
    """Mean over utterances of the per-utterance mean |pred - target|.

    pred/target are [B, T, D] with right padding; lengths gives each
    utterance's valid frame count. Padded frames never contribute.
    """
    if pred.shape != target.shape:
        raise ValueError("shape mismatch")
    if len(lengths) != pred.shape[0]:
        raise ValueError("need one length per batch row")
    terms = []
    for b, length in enumerate(lengths):
        if not 0 < length <= pred.shape[1]:
            raise ValueError(f"bad length {length} for {pred.shape[1]} frames")
        terms.append(_l1(pred[b, :length], target[b, :length]))
    return torch.stack(terms).mean()
