"""FCM estimators standing in for trained spectral and waveform models.

Every estimator maps the current separated spectra ``Y`` (I, J, N) to an
:class:`~idlta.fcm.FcmSeries`:

* :class:`OracleEstimator` uses the STFT of known reference sources, i.e. the
  maximum-likelihood rank-1 covariance of each frame.
* :class:`FileBackedEstimator` loads externally computed power spectra and
  time-domain estimates.
* :class:`PassthroughEstimator` refines from ``Y`` itself.
"""

import numpy as np

from .audio_io import read_tensor, read_wav
from .errors import ConfigurationError, FormatError
from .fcm import FcmSeries
from .stft import stft_forward

FLOOR_RATIO = 1e-10
ABSOLUTE_FLOOR = 1e-30


def power_floor(X):
    """Per-bin floor ``1e-10 * mean_{j,m} |x_ijm|^2``, shaped (I, 1, 1)."""
    power = np.mean(X.real**2 + X.imag**2, axis=(1, 2))
    return np.maximum(FLOOR_RATIO * power, ABSOLUTE_FLOOR)[:, np.newaxis, np.newaxis]


def _check_shape(name, array, shape):
    if array.shape != shape:
        raise FormatError(f"{name} has shape {array.shape}, expected (I, J, N) = {shape}")


class Estimator:
    n_sources = None

    def estimate(self, current_Y, config, alpha, floor=None):
        raise NotImplementedError


class OracleEstimator(Estimator):
    """Rank-1 vectors from reference source spectrograms; ignores ``current_Y``."""

    def __init__(self, references):
        if not references:
            raise ConfigurationError("oracle estimator needs at least one reference source")
        lengths = {ref.length for ref in references}
        if len(lengths) != 1:
            raise ConfigurationError(f"reference sources differ in length: {sorted(lengths)}")
        self.references = list(references)
        self.n_sources = len(references)
        self._spectra = {}

    def reference_spectra(self, config):
        if config not in self._spectra:
            stacked = np.concatenate([ref.samples[:1] for ref in self.references], axis=0)
            self._spectra[config] = stft_forward(stacked, config).data
        return self._spectra[config]

    def estimate(self, current_Y, config, alpha, floor=None):
        z = self.reference_spectra(config)
        _check_shape("oracle reference spectra", z, current_Y.shape)
        if floor is None:
            floor = power_floor(current_Y)
        return FcmSeries(z.real**2 + z.imag**2 + floor, z.copy(), alpha)


class PassthroughEstimator(Estimator):
    """Uses the current separation as both power spectrum and rank-1 vector."""

    def __init__(self, n_sources=None):
        self.n_sources = n_sources

    def estimate(self, current_Y, config, alpha, floor=None):
        if floor is None:
            floor = power_floor(current_Y)
        Y = np.asarray(current_Y, dtype=np.complex128)
        return FcmSeries(Y.real**2 + Y.imag**2 + floor, Y.copy(), alpha)


class FileBackedEstimator(Estimator):
    """Power spectra from a tensor file and/or rank-1 vectors from estimate WAVs.

    Args:
        spectra_path: real tensor file holding ``d2`` with dims (I, J, N).
        estimate_paths: one mono WAV per source; its STFT gives ``z``.

    Missing spectra fall back to ``|z|^2``; missing estimates give ``z = 0``.
    Loaded spectra are floored with ``max(d2, floor)`` so values above the
    floor pass through unchanged.
    """

    def __init__(self, spectra_path=None, estimate_paths=None):
        estimate_paths = list(estimate_paths or [])
        if spectra_path is None and not estimate_paths:
            raise ConfigurationError("file-backed estimator needs spectra and/or estimate files")
        self.spectra = read_tensor(spectra_path) if spectra_path is not None else None
        if self.spectra is not None and np.iscomplexobj(self.spectra):
            raise FormatError(f"{spectra_path}: power spectra must be a real tensor")
        self.estimates = [read_wav(p) for p in estimate_paths]
        for path, sig in zip(estimate_paths, self.estimates):
            if sig.n_channels != 1:
                raise FormatError(f"{path}: estimate must be mono, has {sig.n_channels} channels")
        counts = {len(self.estimates)} if self.estimates else set()
        if self.spectra is not None:
            counts.add(self.spectra.shape[2])
        if len(counts) != 1:
            raise FormatError(f"spectra and estimates disagree on the source count: {sorted(counts)}")
        self.n_sources = counts.pop()
        self._z = {}

    def rank1_vectors(self, config):
        if not self.estimates:
            return None
        if config not in self._z:
            stacked = np.concatenate([sig.samples for sig in self.estimates], axis=0)
            self._z[config] = stft_forward(stacked, config).data
        return self._z[config]

    def estimate(self, current_Y, config, alpha, floor=None):
        shape = current_Y.shape
        z = self.rank1_vectors(config)
        if z is not None:
            _check_shape("estimate spectrogram", z, shape)
        if self.spectra is not None:
            _check_shape("power spectra", self.spectra, shape)
        if floor is None:
            floor = power_floor(current_Y)
        if z is None:
            z = np.zeros(shape, dtype=np.complex128)
        d2 = self.spectra if self.spectra is not None else z.real**2 + z.imag**2
        return FcmSeries(np.maximum(d2, floor), z.copy(), alpha)


def estimate_fcm(kind, current_Y, config, alpha, floor=None):
    """Dispatch to ``kind.estimate``; kept as a plain function entry point."""
    return kind.estimate(current_Y, config, alpha, floor)
