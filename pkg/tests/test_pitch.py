import numpy as np
import pytest

from vqtts.dsp import PitchTrack, Waveform, extract_pitch, frame_count, phone_average_pitch


def tone(freq_hz, seconds=1.0, rate=16000, amp=0.4):
    t = np.arange(int(seconds * rate)) / rate
    return Waveform(amp * np.sin(2 * np.pi * freq_hz * t), rate)


def test_pure_tone_220():
    track = extract_pitch(tone(220.0), hop=200)
    voiced = track.f0_hz[track.f0_hz > 0]
    assert voiced.size >= 0.9 * track.num_frames
    assert np.all(np.abs(voiced - 220.0) <= 0.05 * 220.0)


def test_silence_is_unvoiced():
    track = extract_pitch(Waveform(np.zeros(16000), 16000), hop=200)
    assert np.all(track.f0_hz == 0)


def test_frame_count_matches_shared_framing():
    for n in (999, 4000, 16000, 16001):
        track = extract_pitch(Waveform(0.1 * np.ones(n), 16000), hop=200)
        assert track.num_frames == frame_count(n, 200)


@pytest.mark.parametrize("freq", [80.0, 110.0, 160.0, 220.0, 300.0, 400.0])
def test_tone_band_accuracy(freq):
    track = extract_pitch(tone(freq, seconds=0.5), hop=200)
    voiced = track.f0_hz[track.f0_hz > 0]
    assert voiced.size > 0
    assert np.max(np.abs(voiced - freq) / freq) < 0.05


def test_rejects_non_feature_rate():
    with pytest.raises(ValueError):
        extract_pitch(Waveform(np.zeros(2400), 24000), hop=300)


def test_track_validation():
    with pytest.raises(ValueError):
        PitchTrack(np.array([-1.0]), 200)
    with pytest.raises(ValueError):
        PitchTrack(np.array([30.0]), 200)  # voiced but below search band
    with pytest.raises(ValueError):
        PitchTrack(np.array([100.0]), 0)


def test_phone_average_constant():
    track = PitchTrack(np.full(10, 100.0), 200)
    np.testing.assert_allclose(phone_average_pitch(track, [3, 4, 3]), [100.0, 100.0, 100.0])


def test_phone_average_two_spans():
    track = PitchTrack(np.array([100.0, 100.0, 200.0, 200.0]), 200)
    np.testing.assert_allclose(phone_average_pitch(track, [2, 2]), [100.0, 200.0])


def test_phone_average_skips_unvoiced():
    track = PitchTrack(np.array([0.0, 0.0, 150.0, 150.0]), 200)
    np.testing.assert_allclose(phone_average_pitch(track, [2, 2]), [0.0, 150.0])


def test_phone_average_errors():
    track = PitchTrack(np.full(4, 100.0), 200)
    with pytest.raises(ValueError):
        phone_average_pitch(track, [2, -1])
    with pytest.raises(ValueError):
        phone_average_pitch(track, [3, 3])
