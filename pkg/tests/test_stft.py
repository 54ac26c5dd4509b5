import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idlta.errors import ConfigurationError, InvalidInputError
from idlta.stft import (
    MixtureSpectrogram,
    StftConfig,
    TimeSignal,
    analysis_window,
    frame_count,
    stft_forward,
    stft_inverse,
)


def rel_l2(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_default_preset_is_512_256_ms_at_8k():
    cfg = StftConfig.from_ms(512, 256, 8000)
    assert (cfg.window_length_samples, cfg.hop_samples, cfg.window_kind) == (4096, 2048, "hamming")
    assert cfg == StftConfig()
    assert cfg.n_bins == 2049


@pytest.mark.parametrize("kwargs", [
    dict(window_length_samples=256, hop_samples=300),
    dict(window_length_samples=255, hop_samples=100),
    dict(window_length_samples=256, hop_samples=0),
    dict(window_length_samples=256, hop_samples=128, window_kind="blackman"),
])
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigurationError):
        StftConfig(**kwargs)


def test_from_ms_rejects_fractional_samples():
    with pytest.raises(ConfigurationError):
        StftConfig.from_ms(512, 256.1, 8000)


def test_frame_count_convention(small_stft):
    # 1000 samples + 2 * 128 padding, 256-sample frames every 128
    assert frame_count(1000, small_stft) == (1000 + 256 - 256) // 128 + 1
    spec = stft_forward(np.zeros((1, 1000)), small_stft)
    assert spec.data.shape == (129, frame_count(1000, small_stft), 1)


def test_zero_signal_gives_zero_spectrogram(small_stft):
    spec = stft_forward(np.zeros((2, 600)), small_stft)
    assert np.all(spec.data == 0)
    back = stft_inverse(spec)
    assert np.all(back.samples == 0) and back.samples.shape == (2, 600)


def test_short_signal_rejected(small_stft):
    with pytest.raises(InvalidInputError):
        stft_forward(np.zeros((1, 255)), small_stft)


def test_bin_centred_sinusoid_matches_direct_dft(small_stft):
    L, k = small_stft.window_length_samples, 17
    t = np.arange(4000)
    x = np.cos(2 * np.pi * k * t / L)
    spec = stft_forward(x[np.newaxis], small_stft).data[:, :, 0]

    # direct DFT of one interior frame
    j = 10
    start = j * small_stft.hop_samples - small_stft.padding
    frame = x[start:start + L] * analysis_window(small_stft)
    basis = np.exp(-2j * np.pi * np.outer(np.arange(L // 2 + 1), np.arange(L)) / L)
    np.testing.assert_allclose(spec[:, j], basis @ frame, atol=1e-9)

    energy = np.abs(spec[:, 2:-2]) ** 2
    assert np.all(np.argmax(energy, axis=0) == k)
    lobe = energy[k - 1:k + 2].sum(axis=0) / energy.sum(axis=0)
    assert np.all(lobe >= 0.99)


@pytest.mark.parametrize("kind", ["hamming", "hann", "sqrt_hann"])
@pytest.mark.parametrize("hop", [64, 128, 200, 256])
def test_round_trip_all_windows(rng, kind, hop):
    cfg = StftConfig(256, hop, kind, 8000)
    x = rng.standard_normal((2, 3001))
    if hop == 256 and kind != "hamming":
        # periodic hann is zero at n = 0, so frame boundaries are not covered
        with pytest.raises(ConfigurationError):
            stft_inverse(stft_forward(x, cfg))
        return
    back = stft_inverse(stft_forward(x, cfg)).samples
    assert back.shape == x.shape
    assert rel_l2(back, x) < 1e-10


def test_white_noise_round_trip_peak_error(rng):
    cfg = StftConfig()
    x = rng.standard_normal((1, 40000))
    back = stft_inverse(stft_forward(x, cfg)).samples
    assert np.max(np.abs(back - x)) < 1e-6 * np.max(np.abs(x))


def test_dc_and_nyquist_are_real_after_inverse(rng, small_stft):
    spec = stft_forward(rng.standard_normal((1, 2000)), small_stft)
    assert np.allclose(spec.data[0].imag, 0, atol=1e-9)
    assert np.allclose(spec.data[-1].imag, 0, atol=1e-9)
    noisy = MixtureSpectrogram(spec.data.copy(), small_stft, spec.length)
    noisy.data[0] += 1j
    # the imaginary part of DC carries no information in a real signal
    np.testing.assert_allclose(stft_inverse(noisy).samples, stft_inverse(spec).samples, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(length=st.integers(256, 4000), seed=st.integers(0, 2**31 - 1),
       a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_linearity(length, seed, a, b):
    cfg = StftConfig(256, 128, "hamming", 8000)
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, length))
    lhs = stft_forward((a * x + b * y)[None], cfg).data
    rhs = a * stft_forward(x[None], cfg).data + b * stft_forward(y[None], cfg).data
    scale = max(np.max(np.abs(rhs)), 1e-300)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale + 1e-300


@settings(max_examples=40, deadline=None)
@given(length=st.integers(256, 5000), seed=st.integers(0, 2**31 - 1),
       kind=st.sampled_from(["hamming", "hann", "sqrt_hann"]))
def test_round_trip_property(length, seed, kind):
    cfg = StftConfig(256, 64, kind, 8000)
    x = np.random.default_rng(seed).standard_normal((1, length))
    assert rel_l2(stft_inverse(stft_forward(x, cfg)).samples, x) < 1e-6


def test_frame_count_deterministic(small_stft):
    assert [frame_count(n, small_stft) for n in (256, 257, 511, 512, 513)] == \
        [frame_count(n, small_stft) for n in (256, 257, 511, 512, 513)]
    assert frame_count(256, small_stft) == 3


def test_large_hop_still_covers_tail(rng):
    cfg = StftConfig(256, 250, "hamming", 8000)
    x = rng.standard_normal((1, 1777))
    assert rel_l2(stft_inverse(stft_forward(x, cfg)).samples, x) < 1e-10


def test_time_signal_validation():
    with pytest.raises(InvalidInputError):
        TimeSignal(np.array([[np.nan, 1.0]]), 8000)
    sig = TimeSignal(np.arange(4.0), 8000)
    assert sig.n_channels == 1 and sig.length == 4
