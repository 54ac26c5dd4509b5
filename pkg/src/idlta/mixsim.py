"""Determined mixture synthesis: instantaneous matrices or FIR impulse responses."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import oaconvolve

from .errors import InvalidInputError
from .stft import TimeSignal


class NarrowbandWarning(UserWarning):
    """Impulse responses are too long for the per-bin mixing approximation."""


@dataclass
class MixSpec:
    """Mixing system description.

    Attributes:
        mode: ``instantaneous`` or ``convolutive``.
        matrix: (M, N) mixing matrix for instantaneous mode.
        impulse_responses: real (M, N, taps) array for convolutive mode.
        normalization: ``none`` or ``unit_source_power`` (sources rescaled to
            unit mean power before mixing).
    """

    mode: str = "instantaneous"
    matrix: np.ndarray = None
    impulse_responses: np.ndarray = None
    normalization: str = "none"

    def __post_init__(self):
        if self.normalization not in ("none", "unit_source_power"):
            raise InvalidInputError(f"unknown normalization {self.normalization!r}")
        if self.mode == "instantaneous":
            if self.matrix is None:
                raise InvalidInputError("instantaneous mode needs a mixing matrix")
            A = np.asarray(self.matrix)
            if np.iscomplexobj(A):
                if np.any(A.imag != 0):
                    raise InvalidInputError("time-domain mixing needs a real matrix")
                A = A.real
            A = A.astype(np.float64)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise InvalidInputError(f"mixing matrix must be square (M = N), got {A.shape}")
            if not np.all(np.isfinite(A)) or np.linalg.cond(A) > 1e12:
                raise InvalidInputError("mixing matrix is singular")
            self.matrix = A
        elif self.mode == "convolutive":
            if self.impulse_responses is None:
                raise InvalidInputError("convolutive mode needs impulse responses")
            h = np.asarray(self.impulse_responses, dtype=np.float64)
            if h.ndim != 3 or h.shape[0] != h.shape[1]:
                raise InvalidInputError(f"impulse responses must be (M, N, taps) with M = N, got {h.shape}")
            if not np.all(np.isfinite(h)):
                raise InvalidInputError("impulse responses contain non-finite values")
            self.impulse_responses = h
        else:
            raise InvalidInputError(f"unknown mixing mode {self.mode!r}")

    @property
    def n_channels(self):
        if self.mode == "instantaneous":
            return self.matrix.shape[0]
        return self.impulse_responses.shape[0]


def _stack_sources(sources):
    if not sources:
        raise InvalidInputError("no sources given")
    rates = {s.sample_rate_hz for s in sources}
    lengths = {s.length for s in sources}
    if len(rates) != 1 or len(lengths) != 1:
        raise InvalidInputError(
            f"sources must share rate and length; rates {sorted(rates)}, lengths {sorted(lengths)}"
        )
    return np.concatenate([s.samples[:1] for s in sources], axis=0), rates.pop()


def mix(sources, spec):
    """Mix single-channel ``sources`` into an M-channel :class:`TimeSignal`."""
    S, rate = _stack_sources(sources)
    if S.shape[0] != spec.n_channels:
        raise InvalidInputError(f"{S.shape[0]} sources for a {spec.n_channels}-channel mixing system")
    if spec.normalization == "unit_source_power":
        S = S / np.sqrt(np.mean(S**2, axis=1, keepdims=True))
    if spec.mode == "instantaneous":
        return TimeSignal(spec.matrix @ S, rate)
    h = spec.impulse_responses
    length = S.shape[1]
    out = np.zeros((h.shape[0], length))
    for m in range(h.shape[0]):
        for n in range(h.shape[1]):
            out[m] += oaconvolve(S[n], h[m, n])[:length]
    return TimeSignal(out, rate)


def validate_narrowband(spec, stft_config):
    """Warn when any response is longer than half the analysis window; returns True if ok."""
    if spec.mode != "convolutive":
        return True
    taps = spec.impulse_responses.shape[2]
    limit = stft_config.window_length_samples / 2
    if taps >= limit:
        warnings.warn(
            f"impulse responses have {taps} taps, at least half the {stft_config.window_length_samples}"
            "-sample window; the per-bin mixing approximation degrades",
            NarrowbandWarning,
            stacklevel=2,
        )
        return False
    return True


def synthetic_room_irs(n_channels, taps, seed=0, decay_taps=None, density=0.1):
    """Sparse exponentially decaying FIR responses (M, M, taps) with a unit direct path.

    The direct path of source ``n`` to microphone ``m`` sits at a small
    channel-dependent delay; later taps are sparse Gaussian reflections.
    """
    rng = np.random.default_rng(seed)
    decay_taps = decay_taps or max(taps / 6.0, 1.0)
    t = np.arange(taps)
    h = np.zeros((n_channels, n_channels, taps))
    for m in range(n_channels):
        for n in range(n_channels):
            delay = abs(m - n) * min(2, taps - 1)
            mask = rng.random(taps) < density
            h[m, n] = mask * rng.standard_normal(taps) * 0.3 * np.exp(-t / decay_taps)
            h[m, n, :delay + 1] = 0.0
            h[m, n, delay] = 1.0 if m == n else 0.6
    return h


def modulated_noise_sources(n_sources, length, sample_rate_hz=8000, seed=0, depth=1.5):
    """Independent amplitude-modulated, mildly colored Gaussian noise sources.

    Each source is white noise passed through a random 8-tap FIR filter and
    multiplied by ``exp(depth * e(t))``, where ``e`` is a unit-variance random
    sum of slow sinusoids (0.3 to 4 Hz). Sources are scaled to unit power.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length) / sample_rate_hz
    out = []
    for _ in range(n_sources):
        noise = oaconvolve(rng.standard_normal(length), rng.standard_normal(8))[:length]
        rates = rng.uniform(0.3, 4.0, size=4)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=4)
        env = np.sum(np.sin(2.0 * np.pi * rates[:, None] * t + phases[:, None]), axis=0) / np.sqrt(2.0)
        s = noise * np.exp(depth * env)
        out.append(TimeSignal(s / np.sqrt(np.mean(s**2)), sample_rate_hz))
    return out
