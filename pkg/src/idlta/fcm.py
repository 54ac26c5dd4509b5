"""Diagonal-plus-rank-1 frequency covariance model.

For each frame ``j`` and source ``n`` the covariance over frequency bins is::

    R_jn = (1 - alpha) * diag(d2[:, j, n]) + alpha * z[:, j, n] z[:, j, n]^H

Dense ``I x I`` matrices are only built by the ``dense_*`` helpers, which exist
for verification. Everything else works from the O(I) inverse cache.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDemixingError, InvalidInputError, ModelDomainError
from .stft import MixtureSpectrogram

DET_FLOOR = 1e-300


@dataclass
class FcmSeries:
    """FCM parameters for all frames and sources.

    Attributes:
        diag_power: positive ``d2``, shape (I, J, N).
        rank1_vec: complex ``z``, shape (I, J, N).
        alpha: mixing weight in ``[0, 1)``.
    """

    diag_power: np.ndarray
    rank1_vec: np.ndarray
    alpha: float

    def __post_init__(self):
        alpha = float(self.alpha)
        if not np.isfinite(alpha):
            raise InvalidInputError("alpha is not finite")
        if not 0.0 <= alpha < 1.0:
            raise ModelDomainError(f"alpha must lie in [0, 1), got {alpha}")
        d2 = np.asarray(self.diag_power, dtype=np.float64)
        z = np.asarray(self.rank1_vec, dtype=np.complex128)
        if d2.ndim != 3 or d2.shape != z.shape:
            raise InvalidInputError(
                f"diag_power {d2.shape} and rank1_vec {z.shape} must share an (I, J, N) shape"
            )
        if not (np.all(np.isfinite(d2)) and np.all(np.isfinite(z))):
            raise InvalidInputError("FCM parameters contain non-finite values")
        if np.any(d2 <= 0):
            raise ModelDomainError("diag_power must be strictly positive")
        self.diag_power, self.rank1_vec, self.alpha = d2, z, alpha

    @property
    def shape(self):
        return self.diag_power.shape


@dataclass
class FcmInverseCache:
    """``zhat`` (I, J, N) and ``xi`` (J, N) such that
    ``R^-1 = (diag(1 / d2) - alpha * zhat zhat^H) / (1 - alpha)``."""

    zhat: np.ndarray
    xi: np.ndarray


def build_inverse_cache(fcm):
    alpha = fcm.alpha
    if alpha >= 1.0:
        raise ModelDomainError(f"alpha must be < 1, got {alpha}")
    d2, z = fcm.diag_power, fcm.rank1_vec
    if not (np.all(np.isfinite(d2)) and np.all(np.isfinite(z))):
        raise InvalidInputError("FCM parameters contain non-finite values")
    z_over_d2 = z / d2
    s = np.sum((z.real**2 + z.imag**2) / d2, axis=0)
    xi = (1.0 - alpha + alpha * s) ** -0.5
    return FcmInverseCache(zhat=xi[np.newaxis] * z_over_d2, xi=xi)


def inverse_entry(cache, fcm, i_row, i_col, j, n):
    """Entry ``[R_jn^-1]_{i_row, i_col}`` in O(1)."""
    alpha = fcm.alpha
    value = -alpha * cache.zhat[i_row, j, n] * np.conj(cache.zhat[i_col, j, n])
    if i_row == i_col:
        value += 1.0 / fcm.diag_power[i_row, j, n]
    return value / (1.0 - alpha)


def inverse_diagonal(cache, fcm):
    """All diagonal entries ``[R_jn^-1]_{ii}``, shape (I, J, N)."""
    alpha = fcm.alpha
    zhat = cache.zhat
    return (1.0 / fcm.diag_power - alpha * (zhat.real**2 + zhat.imag**2)) / (1.0 - alpha)


def dense_fcm(fcm, j, n):
    z = fcm.rank1_vec[:, j, n]
    return (1.0 - fcm.alpha) * np.diag(fcm.diag_power[:, j, n]) + fcm.alpha * np.outer(z, z.conj())


def dense_inverse_from_cache(cache, fcm, j, n):
    zhat = cache.zhat[:, j, n]
    alpha = fcm.alpha
    return (np.diag(1.0 / fcm.diag_power[:, j, n]) - alpha * np.outer(zhat, zhat.conj())) / (1.0 - alpha)


def log_det_all(fcm, cache=None):
    """``log det R_jn`` for every frame and source, shape (J, N).

    Uses the matrix determinant lemma:
    ``(I - 1) log(1 - alpha) + sum_i log d2 - 2 log xi``.
    """
    if cache is None:
        cache = build_inverse_cache(fcm)
    n_bins = fcm.diag_power.shape[0]
    return ((n_bins - 1) * np.log1p(-fcm.alpha)
            + np.sum(np.log(fcm.diag_power), axis=0)
            - 2.0 * np.log(cache.xi))


def log_det(fcm, j, n, cache=None):
    if cache is None:
        cache = build_inverse_cache(fcm)
    n_bins = fcm.diag_power.shape[0]
    return float((n_bins - 1) * np.log1p(-fcm.alpha)
                 + np.sum(np.log(fcm.diag_power[:, j, n]))
                 - 2.0 * np.log(cache.xi[j, n]))


def source_nll(y, fcm, cache, j, n):
    """``y^H R_jn^-1 y + log det R_jn`` for one separated frame ``y`` of length I."""
    y = np.asarray(y, dtype=np.complex128)
    alpha = fcm.alpha
    power = np.sum((y.real**2 + y.imag**2) / fcm.diag_power[:, j, n])
    proj = np.vdot(cache.zhat[:, j, n], y)
    quad = (power - alpha * (proj.real**2 + proj.imag**2)) / (1.0 - alpha)
    return float(quad + log_det(fcm, j, n, cache))


def quadratic_forms(Y, fcm, cache):
    """``y_jn^H R_jn^-1 y_jn`` for all frames and sources, shape (J, N)."""
    alpha = fcm.alpha
    power = np.sum((Y.real**2 + Y.imag**2) / fcm.diag_power, axis=0)
    proj = np.sum(cache.zhat.conj() * Y, axis=0)
    return (power - alpha * (proj.real**2 + proj.imag**2)) / (1.0 - alpha)


def spectrogram_data(spec):
    """Raw (I, J, M) array of a :class:`MixtureSpectrogram` or array-like."""
    if isinstance(spec, MixtureSpectrogram):
        return spec.data
    return np.asarray(spec)


def demix(X, W):
    """Separated spectra ``y_ij = W_i x_ij`` for X (I, J, M) and W (I, N, M)."""
    return np.matmul(X, np.swapaxes(W, 1, 2))


def log_abs_det_sq(W):
    """``log |det W_i|^2`` per frequency; raises on numerically singular W_i."""
    det = np.abs(np.linalg.det(W))
    if np.any(~np.isfinite(det)) or np.any(det < DET_FLOOR):
        bad = int(np.argmin(np.where(np.isfinite(det), det, 0.0)))
        raise DegenerateDemixingError(f"demixing matrix at bin {bad} is singular")
    return 2.0 * np.log(det)


def total_objective(spec, W, fcm, cache=None):
    """Negative log-likelihood up to a constant for mixture ``spec``.

    ``sum_{j,n} (y^H R^-1 y + log det R) - J sum_i log |det W_i|^2``
    """
    X = spectrogram_data(spec)
    if cache is None:
        cache = build_inverse_cache(fcm)
    n_frames = X.shape[1]
    penalty = log_abs_det_sq(W)
    Y = demix(X, W)
    nll = quadratic_forms(Y, fcm, cache) + log_det_all(fcm, cache)
    return float(np.sum(nll) - n_frames * np.sum(penalty))
