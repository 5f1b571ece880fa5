import numpy as np
import pytest
import torch

from conftest import assert_gradients_match
from vqtts.codec import (
    BidirectionalRecurrent,
    CodecConfig,
    CodecModel,
    Decoder,
    Encoder,
    FrameRepresentation,
    pad_to_frame_multiple,
    toggle_skips,
)
from vqtts.dsp import Waveform
from vqtts.quantizer import QuantizerConfig

TOY = CodecConfig(channels=(2, 3, 4, 5), latent_dim=6, lem_hidden=4)


class TestConfig:
    def test_factor_product_must_cover_frame(self):
        with pytest.raises(ValueError):
            CodecConfig(downsample_factors=(5, 5, 4, 4))

    def test_channels_per_block(self):
        with pytest.raises(ValueError):
            CodecConfig(channels=(16, 32))

    def test_unknown_recurrence(self):
        with pytest.raises(ValueError):
            CodecConfig(recurrence="lstm")

    def test_frame_samples(self):
        assert CodecConfig().frame_samples == 300


class TestFrameRepresentation:
    def test_frame_count_bookkeeping(self):
        FrameRepresentation(np.zeros((81, 8), dtype=np.float32), source_samples=24100)
        with pytest.raises(ValueError):
            FrameRepresentation(np.zeros((80, 8), dtype=np.float32), source_samples=24100)

    def test_rejects_non_finite(self):
        bad = np.full((2, 3), np.nan, dtype=np.float32)
        with pytest.raises(ValueError):
            FrameRepresentation(bad)

    def test_pad_to_frame_multiple(self):
        assert pad_to_frame_multiple(np.zeros(24000), 300).size == 24000
        assert pad_to_frame_multiple(np.zeros(24100), 300).size == 24300


class TestEncoder:
    def test_one_second_gives_80_frames(self):
        encoder = Encoder(TOY).eval()
        latents, taps = encoder(torch.zeros(1, 24000))
        assert latents.shape == (1, 80, TOY.latent_dim)
        assert len(taps) == 3
        assert [t.shape[2] for t in taps] == [4800, 960, 240]

    def test_single_frame(self):
        encoder = Encoder(TOY).eval()
        latents, _ = encoder(torch.zeros(2, 300))
        assert latents.shape == (2, 1, TOY.latent_dim)

    def test_deterministic(self):
        encoder = Encoder(TOY).eval()
        x = torch.randn(1, 1200)
        with torch.no_grad():
            first, _ = encoder(x)
            second, _ = encoder(x)
        assert torch.equal(first, second)

    def test_rejects_partial_frame(self):
        with pytest.raises(ValueError):
            Encoder(TOY)(torch.zeros(1, 24100))


class TestDecoder:
    def test_80_frames_give_one_second(self):
        decoder = Decoder(TOY).eval()
        wave = decoder(torch.randn(1, 80, TOY.latent_dim))
        assert wave.shape == (1, 24000)

    def test_single_frame(self):
        decoder = Decoder(TOY).eval()
        assert decoder(torch.randn(1, 1, TOY.latent_dim)).shape == (1, 300)

    def test_output_bounded(self):
        decoder = Decoder(TOY).eval()
        wave = decoder(5.0 * torch.randn(1, 10, TOY.latent_dim))
        assert torch.all(wave >= -1.0) and torch.all(wave <= 1.0)

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Decoder(TOY)(torch.randn(1, 10, TOY.latent_dim + 1))

    def test_taps_change_output(self):
        encoder, decoder = Encoder(TOY).eval(), Decoder(TOY).eval()
        x = 0.3 * torch.randn(1, 1200)
        with torch.no_grad():
            latents, taps = encoder(x)
            without = decoder(latents, taps=None)
            with_taps = decoder(latents, taps=taps)
            zero_taps = decoder(latents, taps=[torch.zeros_like(t) for t in taps])
        assert not torch.equal(without, with_taps)
        assert torch.equal(without, zero_taps)


class TestRecurrentLayer:
    @pytest.mark.parametrize("kind", ["lem", "gru"])
    def test_length_preserved(self, kind):
        layer = BidirectionalRecurrent(6, 4, kind)
        assert layer(torch.randn(2, 1, 6)).shape == (2, 1, 6)
        assert layer(torch.randn(2, 9, 6)).shape == (2, 9, 6)

    @pytest.mark.parametrize("kind", ["lem", "gru"])
    def test_time_reversal_symmetry(self, kind):
        # one shared cell for both directions: flipping input time and
        # flipping the output is exactly the same map, bit for bit
        layer = BidirectionalRecurrent(5, 7, kind).eval()
        seq = torch.randn(3, 11, 5)
        with torch.no_grad():
            direct = layer(seq.flip(1))
            flipped = layer(seq).flip(1)
        assert torch.equal(direct, flipped)

    def test_gradients_match_finite_differences(self):
        layer = BidirectionalRecurrent(3, 4, "lem").double()
        seq = torch.randn(1, 4, 3, dtype=torch.float64)
        target = torch.randn(1, 4, 3, dtype=torch.float64)
        assert_gradients_match(layer, lambda: ((layer(seq) - target) ** 2).sum())


class TestCodecModel:
    def test_forward_with_quantizer(self):
        qcfg = QuantizerConfig(num_stages=2, codebook_size=16, dim=TOY.latent_dim)
        model = CodecModel(TOY, qcfg)
        model.train()
        out = model(0.2 * torch.randn(1, 1200))
        assert out.reconstruction.shape == (1, 1200)
        assert out.indices.shape == (1, 4, 2)
        assert out.commitment_loss.requires_grad

    def test_quantizer_dim_must_match(self):
        with pytest.raises(ValueError):
            CodecModel(TOY, QuantizerConfig(num_stages=2, codebook_size=16, dim=9))

    def test_encode_decode_wave_round_trip_length(self):
        model = CodecModel(TOY)
        wave = Waveform(0.1 * np.sin(np.linspace(0, 100, 24100)), 24000)
        repr_ = model.encode_wave(wave)
        assert repr_.num_frames == 81  # ceil(24100 / 300)
        out = model.decode_frames(repr_)
        assert out.num_samples == 24100
        assert out.sample_rate_hz == 24000

    def test_encode_rejects_wrong_rate(self):
        model = CodecModel(TOY)
        with pytest.raises(ValueError):
            model.encode_wave(Waveform(np.zeros(16000), 16000))

    def test_decode_rejects_wrong_dim(self):
        model = CodecModel(TOY)
        with pytest.raises(ValueError):
            model.decode_frames(FrameRepresentation(np.zeros((4, TOY.latent_dim + 1))))

    def test_skip_toggle_round_trip(self):
        model = CodecModel(TOY).eval()
        x = 0.3 * torch.randn(1, 1200)
        with torch.no_grad():
            before = model(x).reconstruction
            toggle_skips(model, False)
            disabled = model(x).reconstruction
            toggle_skips(model, True)
            after = model(x).reconstruction
        assert not torch.equal(before, disabled)
        assert torch.equal(before, after)

    def test_disabled_skips_ignore_tap_values(self):
        model = CodecModel(TOY).eval()
        toggle_skips(model, False)
        x = 0.3 * torch.randn(1, 1200)

        original_forward = model.encoder.forward

        def perturbed_forward(inp):
            latents, taps = original_forward(inp)
            return latents, [t + 100.0 for t in taps]

        with torch.no_grad():
            clean = model(x).reconstruction
            model.encoder.forward = perturbed_forward
            noisy = model(x).reconstruction
        assert torch.equal(clean, noisy)


class TestGradients:
    def test_encoder_matches_finite_differences(self):
        encoder = Encoder(TOY).double()
        x = 0.5 * torch.randn(1, 600, dtype=torch.float64)

        def loss():
            latents, taps = encoder(x)
            return (latents**2).sum() + sum((t**2).sum() for t in taps)

        assert_gradients_match(encoder, loss)

    def test_decoder_matches_finite_differences(self):
        decoder = Decoder(TOY).double()
        latents = torch.randn(1, 2, TOY.latent_dim, dtype=torch.float64)
        target = torch.randn(1, 600, dtype=torch.float64)
        assert_gradients_match(decoder, lambda: ((decoder(latents) - target) ** 2).sum())
