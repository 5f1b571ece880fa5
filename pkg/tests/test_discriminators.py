import numpy as np
import pytest
import torch

from conftest import assert_gradients_match
from vqtts.discriminators import (
    DiscriminatorOutput,
    MultiPeriodDiscriminator,
    MultiScaleDiscriminator,
    PeriodDiscriminator,
    ScaleDiscriminator,
    fold_period,
    period_score_shape,
    scale_score_shape,
)
from vqtts.dsp import Waveform, haar_dwt
from vqtts.nnops import haar_dwt_channels


class TestFoldPeriod:
    def test_padding_arithmetic(self):
        grid = fold_period(torch.zeros(1, 1000), 3)
        assert grid.shape == (1, 1, 334, 3)  # padded 1000 -> 1002

    def test_exact_multiple_unpadded(self):
        assert fold_period(torch.zeros(2, 999), 3).shape == (2, 1, 333, 3)

    def test_bad_period(self):
        with pytest.raises(ValueError):
            fold_period(torch.zeros(1, 10), 0)
        with pytest.raises(ValueError):
            PeriodDiscriminator(-2)


class TestMultiPeriod:
    def test_group_count_matches_periods(self):
        disc = MultiPeriodDiscriminator().eval()
        out = disc(torch.randn(1, 1000) * 0.1)
        assert len(out.scores) == 5
        assert len(out.features) == 5
        assert all(len(f) == 5 for f in out.features)

    def test_deterministic(self):
        disc = MultiPeriodDiscriminator(periods=(2, 3)).eval()
        x = 0.1 * torch.randn(1, 600)
        with torch.no_grad():
            a = disc(x)
            b = disc(x)
        for s1, s2 in zip(a.scores, b.scores):
            assert torch.equal(s1, s2)

    def test_accepts_waveform(self):
        disc = MultiPeriodDiscriminator(periods=(2,)).eval()
        out = disc(Waveform(np.zeros(500), 24000))
        assert out.scores[0].shape[0] == 1

    def test_output_dataclass_guard(self):
        with pytest.raises(ValueError):
            DiscriminatorOutput(scores=[1, 2], features=[[1]])


class TestDwtChannels:
    def test_matches_numpy_reference(self, rng):
        x = rng.normal(size=1024)
        approx, detail = haar_dwt(x)
        out = haar_dwt_channels(torch.tensor(x, dtype=torch.float64).reshape(1, 1, -1))
        np.testing.assert_allclose(out[0, 0].numpy(), approx, atol=1e-12)
        np.testing.assert_allclose(out[0, 1].numpy(), detail, atol=1e-12)

    def test_constant_input_zero_detail(self):
        out = haar_dwt_channels(torch.ones(1, 1, 64))
        assert torch.all(out[:, 1] == 0)

    def test_energy_preserved_level1(self, rng):
        x = torch.tensor(rng.normal(size=(2, 1, 2048)))
        out = haar_dwt_channels(x)
        in_energy = (x**2).sum(dim=(1, 2))
        out_energy = (out**2).sum(dim=(1, 2))
        torch.testing.assert_close(in_energy, out_energy, atol=1e-6, rtol=0)

    def test_energy_preserved_cascade(self, rng):
        x = torch.tensor(rng.normal(size=(1, 1, 4096)))
        level2 = haar_dwt_channels(haar_dwt_channels(x))
        assert level2.shape == (1, 4, 1024)
        torch.testing.assert_close((level2**2).sum(), (x**2).sum(), atol=1e-6, rtol=0)

    def test_odd_length_padded(self):
        assert haar_dwt_channels(torch.randn(1, 2, 7)).shape == (1, 4, 4)


class TestMultiScale:
    def test_three_score_groups(self):
        disc = MultiScaleDiscriminator().eval()
        out = disc(0.1 * torch.randn(1, 1000))
        assert len(out.scores) == 3
        assert all(len(f) == 5 for f in out.features)

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            MultiScaleDiscriminator()(torch.zeros(1, 3))

    def test_channel_widths_capped(self):
        for disc in (MultiPeriodDiscriminator(), MultiScaleDiscriminator()):
            for module in disc.modules():
                if isinstance(module, (torch.nn.Conv1d, torch.nn.Conv2d)):
                    assert module.out_channels <= 64


class TestShapeLaws:
    @pytest.mark.parametrize("length", [300, 1000, 24000])
    def test_period_shapes(self, length):
        disc = MultiPeriodDiscriminator().eval()
        out = disc(torch.zeros(1, length))
        for period, score in zip(disc.periods, out.scores):
            assert score.shape == (1,) + period_score_shape(length, period)

    @pytest.mark.parametrize("length", [300, 1000, 24000])
    def test_scale_shapes(self, length):
        disc = MultiScaleDiscriminator().eval()
        out = disc(torch.zeros(1, length))
        for level, score in enumerate(out.scores):
            assert score.shape == (1,) + scale_score_shape(length, level)


class TestGradients:
    def test_period_discriminator_matches_finite_differences(self):
        disc = PeriodDiscriminator(3).double()
        x = 0.5 * torch.randn(1, 90, dtype=torch.float64)

        def loss():
            score, feats = disc(x)
            return (score**2).sum() + sum(f.abs().sum() for f in feats)

        assert_gradients_match(disc, loss, max_elements=16)

    def test_scale_discriminator_matches_finite_differences(self):
        disc = ScaleDiscriminator(2).double()
        h = 0.5 * torch.randn(1, 2, 64, dtype=torch.float64)

        def loss():
            score, feats = disc(h)
            return (score**2).sum() + sum(f.abs().sum() for f in feats)

        assert_gradients_match(disc, loss, max_elements=16)
