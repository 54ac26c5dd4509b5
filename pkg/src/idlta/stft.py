"""Short-time Fourier transform with exact weighted overlap-add inversion.

Frames are taken from the signal after zero padding ``window_length - hop``
samples on both ends, so every input sample lies under full analysis frames.
The inverse divides the overlap-added, synthesis-windowed frames by the
running sum of squared analysis windows, which is the canonical dual window
of any analysis window whose shifted copies cover each sample.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.signal import get_window

from .errors import ConfigurationError, InvalidInputError

WINDOW_KINDS = ("hamming", "hann", "sqrt_hann")


@dataclass(frozen=True)
class StftConfig:
    """STFT analysis parameters.

    Attributes:
        window_length_samples: Frame length ``L``; must be even so that the
            one-sided spectrum has ``L / 2 + 1`` bins.
        hop_samples: Frame shift, ``1 <= hop <= L``.
        window_kind: One of ``hamming``, ``hann`` or ``sqrt_hann`` (periodic).
        sample_rate_hz: Sampling rate the sizes refer to.
    """

    window_length_samples: int = 4096
    hop_samples: int = 2048
    window_kind: str = "hamming"
    sample_rate_hz: int = 8000

    def __post_init__(self):
        L, hop = self.window_length_samples, self.hop_samples
        for name, value in (("window_length_samples", L), ("hop_samples", hop),
                            ("sample_rate_hz", self.sample_rate_hz)):
            if int(value) != value or value <= 0:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
        if L % 2:
            raise ConfigurationError(f"window_length_samples must be even, got {L}")
        if hop > L:
            raise ConfigurationError(f"hop_samples ({hop}) exceeds window length ({L})")
        if self.window_kind not in WINDOW_KINDS:
            raise ConfigurationError(
                f"window_kind must be one of {WINDOW_KINDS}, got {self.window_kind!r}"
            )

    @classmethod
    def from_ms(cls, window_ms=512.0, hop_ms=256.0, sample_rate_hz=8000, window_kind="hamming"):
        """Build a config from durations; both must map to whole sample counts."""
        sizes = []
        for name, ms in (("window", window_ms), ("hop", hop_ms)):
            n = Fraction(str(ms)) * sample_rate_hz / 1000
            if n.denominator != 1:
                raise ConfigurationError(
                    f"{name} of {ms} ms is not a whole number of samples at {sample_rate_hz} Hz"
                )
            sizes.append(int(n))
        return cls(sizes[0], sizes[1], window_kind, int(sample_rate_hz))

    @property
    def n_bins(self):
        return self.window_length_samples // 2 + 1

    @property
    def padding(self):
        return self.window_length_samples - self.hop_samples


@dataclass
class TimeSignal:
    """Real multichannel audio, ``samples`` shaped (channels, length)."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise InvalidInputError(f"samples must be (channels, length), got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("samples contain non-finite values")
        if int(self.sample_rate_hz) != self.sample_rate_hz or self.sample_rate_hz <= 0:
            raise InvalidInputError(f"invalid sample rate {self.sample_rate_hz!r}")
        self.samples = samples
        self.sample_rate_hz = int(self.sample_rate_hz)

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def length(self):
        return self.samples.shape[1]

    def channel(self, index):
        return TimeSignal(self.samples[index], self.sample_rate_hz)


@dataclass
class MixtureSpectrogram:
    """One-sided STFT tensor shaped (I bins, J frames, M channels)."""

    data: np.ndarray
    config: StftConfig
    length: int = field(default=0)

    @property
    def n_bins(self):
        return self.data.shape[0]

    @property
    def n_frames(self):
        return self.data.shape[1]

    @property
    def n_channels(self):
        return self.data.shape[2]


def analysis_window(config):
    L = config.window_length_samples
    if config.window_kind == "sqrt_hann":
        return np.sqrt(get_window("hann", L, fftbins=True))
    return get_window(config.window_kind, L, fftbins=True)


def frame_count(length, config):
    """Number of frames produced for a signal of ``length`` samples.

    ``J = (length + 2 * pad - L) // hop + 1``; when ``hop > (L + 1) / 2`` this
    can leave the tail uncovered, in which case frames are appended until the
    last input sample is inside a frame.
    """
    L, hop, pad = config.window_length_samples, config.hop_samples, config.padding
    n_frames = (length + 2 * pad - L) // hop + 1
    while (n_frames - 1) * hop + L < pad + length:
        n_frames += 1
    return n_frames


def _window_power_sum(length, config, window):
    L, hop = config.window_length_samples, config.hop_samples
    n_frames = frame_count(length, config)
    total = (n_frames - 1) * hop + L
    acc = np.zeros(total)
    sq = window**2
    for j in range(n_frames):
        acc[j * hop:j * hop + L] += sq
    return acc


def stft_forward(signal, config):
    """Multichannel STFT returning a :class:`MixtureSpectrogram`.

    Args:
        signal: :class:`TimeSignal` or array shaped (channels, length).
        config: :class:`StftConfig`.
    """
    samples = signal.samples if isinstance(signal, TimeSignal) else np.atleast_2d(
        np.asarray(signal, dtype=np.float64))
    L, hop, pad = config.window_length_samples, config.hop_samples, config.padding
    length = samples.shape[1]
    if length < L:
        raise InvalidInputError(f"signal length {length} is shorter than one window ({L})")
    n_frames = frame_count(length, config)
    total = (n_frames - 1) * hop + L
    padded = np.zeros((samples.shape[0], total))
    padded[:, pad:pad + length] = samples
    frames = np.lib.stride_tricks.sliding_window_view(padded, L, axis=-1)[:, ::hop, :]
    spec = np.fft.rfft(frames * analysis_window(config), axis=-1)
    return MixtureSpectrogram(np.ascontiguousarray(spec.transpose(2, 1, 0)), config, length)


def stft_inverse(spec):
    """Invert :func:`stft_forward`; output is trimmed to ``spec.length`` samples."""
    config = spec.config
    L, hop, pad = config.window_length_samples, config.hop_samples, config.padding
    data = np.asarray(spec.data)
    if data.ndim != 3 or data.shape[0] != config.n_bins:
        raise InvalidInputError(
            f"spectrogram must be ({config.n_bins}, frames, channels), got {data.shape}"
        )
    length = spec.length or ((data.shape[1] - 1) * hop + L - 2 * pad)
    if frame_count(length, config) != data.shape[1]:
        raise InvalidInputError(
            f"{data.shape[1]} frames is inconsistent with recorded length {length}"
        )
    window = analysis_window(config)
    frames = np.fft.irfft(data.transpose(2, 1, 0), n=L, axis=-1) * window
    n_frames = data.shape[1]
    out = np.zeros((data.shape[2], (n_frames - 1) * hop + L))
    for j in range(n_frames):
        out[:, j * hop:j * hop + L] += frames[:, j]
    norm = _window_power_sum(length, config, window)[pad:pad + length]
    if np.min(norm) <= 1e-12 * np.max(norm):
        raise ConfigurationError("window/hop pair does not cover every sample; not invertible")
    return TimeSignal(out[:, pad:pad + length] / norm, config.sample_rate_hz)
