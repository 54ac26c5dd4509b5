"""Alternating FCM estimation and VCD sweeps over a multichannel mixture."""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import vcd
from .errors import ConfigurationError, DegenerateDemixingError, InvalidInputError
from .estimators import Estimator, power_floor
from .fcm import build_inverse_cache, demix, total_objective
from .stft import MixtureSpectrogram, StftConfig, stft_forward, stft_inverse

log = logging.getLogger(__name__)


@dataclass
class SeparationConfig:
    alpha: float
    estimator: Estimator
    total_iterations: int = 100
    fcm_refresh_period: int = 10
    stft: StftConfig = field(default_factory=StftConfig)
    reference_channel: int = 0
    record_objective: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.total_iterations < 1 or self.fcm_refresh_period < 1:
            raise ConfigurationError("iteration counts must be positive")
        if self.fcm_refresh_period > self.total_iterations:
            raise ConfigurationError(
                f"fcm_refresh_period ({self.fcm_refresh_period}) exceeds total_iterations "
                f"({self.total_iterations})"
            )
        if not isinstance(self.estimator, Estimator):
            raise ConfigurationError("estimator must be an Estimator instance")


@dataclass
class SeparationResult:
    """Output of :func:`separate`.

    ``W_final`` is the optimizer output before scale restoration;
    ``W_restored`` is what produced ``separated``. ``objective_trace[t]`` is
    the objective after sweep ``t``, under the FCMs estimated at the latest
    refresh (listed in ``refresh_iterations``, 0-based).
    """

    separated: list
    W_final: np.ndarray
    W_restored: np.ndarray
    objective_trace: list
    refresh_iterations: list
    iterations_run: int
    skipped_rows: int = 0


def scale_restore(W, reference_channel=0):
    """Projection back: scale row ``n`` of ``W_i`` by ``[W_i^-1]_{ref, n}``."""
    W = np.asarray(W)
    if not 0 <= reference_channel < W.shape[2]:
        raise InvalidInputError(f"reference channel {reference_channel} out of range")
    det = np.abs(np.linalg.det(W))
    if np.any(~np.isfinite(det)) or np.any(det < 1e-300):
        raise DegenerateDemixingError("cannot restore scale of a singular demixing matrix")
    A = np.linalg.inv(W)
    return A[:, reference_channel, :, np.newaxis] * W


def identity_demixing(n_bins, n_ch):
    return np.ascontiguousarray(np.broadcast_to(np.eye(n_ch, dtype=np.complex128), (n_bins, n_ch, n_ch)))


def separate(mixture, config):
    """Run the alternating optimization on ``mixture`` (:class:`TimeSignal`).

    Iteration ``t`` (1-based) separates with the current ``W``, re-estimates
    the FCMs when ``t mod period == 1`` (every iteration if ``period == 1``),
    then performs one VCD sweep.
    """
    n_ch = mixture.n_channels
    n_src = config.estimator.n_sources
    if n_src is not None and n_src != n_ch:
        raise ConfigurationError(f"estimator provides {n_src} sources for {n_ch} channels")
    if mixture.sample_rate_hz != config.stft.sample_rate_hz:
        raise ConfigurationError(
            f"mixture rate {mixture.sample_rate_hz} Hz differs from STFT rate "
            f"{config.stft.sample_rate_hz} Hz"
        )
    spec = stft_forward(mixture, config.stft)
    X = spec.data
    W = identity_demixing(X.shape[0], n_ch)
    floor = power_floor(X)

    trace, refreshes, skipped_total = [], [], 0
    fcm = cache = Q_reg = None
    for t in range(config.total_iterations):
        if t % config.fcm_refresh_period == 0:
            Y = demix(X, W)
            fcm = config.estimator.estimate(Y, config.stft, config.alpha, floor)
            cache = build_inverse_cache(fcm)
            Q_reg = vcd.regularize(vcd.weighted_covariance(X, fcm, cache))
            refreshes.append(t)
        skipped = vcd.sweep(X, W, fcm, cache, Q_reg)
        if skipped:
            skipped_total += len(skipped)
            log.warning("iteration %d: skipped %d ill-conditioned rows, first %s",
                        t + 1, len(skipped), skipped[0])
        if config.record_objective:
            trace.append(total_objective(X, W, fcm, cache))

    W_restored = scale_restore(W, config.reference_channel)
    Y = demix(X, W_restored)
    out = stft_inverse(MixtureSpectrogram(Y, config.stft, spec.length))
    separated = [out.channel(n) for n in range(out.n_channels)]
    return SeparationResult(
        separated=separated,
        W_final=W,
        W_restored=W_restored,
        objective_trace=trace,
        refresh_iterations=refreshes,
        iterations_run=config.total_iterations,
        skipped_rows=skipped_total,
    )
