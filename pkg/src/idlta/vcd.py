"""Vectorwise coordinate descent (VCD) for the demixing matrices.

Conventions: ``W`` has shape (I, N, M) and ``W[i, n, :]`` is the row
``w_in^H``, so ``y_ijn = W[i, n] @ x_ij``. Row updates are expressed in terms
of the column vector ``w_in = W[i, n].conj()``.

With the FCMs fixed, the objective restricted to ``w_in`` is::

    w^H Q_in w + w^H gamma_in + gamma_in^H w - log |det W_i|^2

and has the closed-form global minimizer implemented in :func:`update_row`.
For ``alpha > 0`` the vector ``gamma_in`` couples the rows of one source
across frequencies, so a sweep must visit them sequentially.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .errors import IllConditionedUpdateError, NumericalError
from .fcm import inverse_diagonal, spectrogram_data

Q_REGULARIZATION = 1e-12
BRANCH_TOLERANCE = 1e-12


@dataclass
class VcdStatistics:
    """Per-source statistics: ``Q`` (I, M, M) and ``gamma`` (I, M)."""

    Q: np.ndarray
    gamma: np.ndarray


def weighted_covariance(X, fcm, cache):
    """``Q_in = (1/J) sum_j [R_jn^-1]_ii x_ij x_ij^H`` for all bins and sources.

    Returns:
        complex array (I, N, M, M).
    """
    n_frames = X.shape[1]
    weights = inverse_diagonal(cache, fcm)
    return np.einsum("ijn,ijm,ijk->inmk", weights, X, X.conj()) / n_frames


def regularize(Q):
    """Add ``1e-12 * trace(Q) / M`` to the diagonal of every ``M x M`` block."""
    n_ch = Q.shape[-1]
    trace = np.trace(Q, axis1=-2, axis2=-1).real
    return Q + (Q_REGULARIZATION * trace / n_ch)[..., np.newaxis, np.newaxis] * np.eye(n_ch)


def cross_frequency_weights(conj_y, zhat, alpha):
    """``h_ij = sum_{i' != i} [R_j^-1]_{i'i} conj(y_i'j)`` for one source.

    Args:
        conj_y: ``conj(y_ijn)`` for the source, shape (I, J).
        zhat: cache vectors for the source, shape (I, J).
    """
    if alpha == 0.0:
        return np.zeros_like(conj_y)
    c = np.sum(zhat * conj_y, axis=0)
    return -(alpha / (1.0 - alpha)) * zhat.conj() * (c[np.newaxis] - zhat * conj_y)


def compute_statistics(spec, W, fcm, cache, n):
    """Accelerated ``Q_in`` and ``gamma_in`` for every bin of source ``n``.

    ``gamma`` is evaluated at the current ``W``; runs in O(I J M^2).
    """
    X = spectrogram_data(spec)
    n_frames = X.shape[1]
    weights = inverse_diagonal(cache, fcm)[:, :, n]
    Q = np.einsum("ij,ijm,ijk->imk", weights, X, X.conj()) / n_frames
    conj_y = np.einsum("im,ijm->ij", W[:, n, :], X).conj()
    h = cross_frequency_weights(conj_y, cache.zhat[:, :, n], fcm.alpha)
    gamma = np.einsum("ij,ijm->im", h, X) / n_frames
    if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(gamma))):
        bad = np.argwhere(~np.isfinite(gamma).all(axis=-1) | ~np.isfinite(Q).all(axis=(-2, -1)))
        raise NumericalError(f"non-finite statistics for source {n} at bin {int(bad[0, 0])}")
    return VcdStatistics(Q=Q, gamma=gamma)


def dense_inverse_fcms(fcm, n):
    """Dense ``R_jn^-1`` for all frames of source ``n`` via a generic solver, (J, I, I)."""
    d2 = fcm.diag_power[:, :, n].T
    z = fcm.rank1_vec[:, :, n].T
    R = (1.0 - fcm.alpha) * d2[:, :, np.newaxis] * np.eye(d2.shape[1])
    R = R + fcm.alpha * z[:, :, np.newaxis] * z.conj()[:, np.newaxis, :]
    return np.linalg.inv(R)


def direct_statistics(spec, W, fcm, n):
    """Reference ``Q_in`` and ``gamma_in`` from dense inverse FCMs; O(J I^3)."""
    X = spectrogram_data(spec)
    n_frames = X.shape[1]
    Rinv = dense_inverse_fcms(fcm, n)
    diag = np.einsum("jii->ij", Rinv)
    Q = np.einsum("ij,ijm,ijk->imk", diag, X, X.conj()) / n_frames
    conj_y = np.einsum("im,ijm->ij", W[:, n, :], X).conj()
    h = np.einsum("jki,kj->ij", Rinv, conj_y) - diag * conj_y
    gamma = np.einsum("ij,ijm->im", h, X) / n_frames
    return VcdStatistics(Q=Q, gamma=gamma)


def exact_branch_threshold(eta_hat, eta=1.0):
    """True when ``eta_hat`` is treated as zero: ``|eta_hat| <= 1e-12 sqrt(eta)``."""
    return abs(eta_hat) <= BRANCH_TOLERANCE * np.sqrt(eta)


def closed_form_row(zeta, zeta_hat, eta, eta_hat):
    """Global minimizer given the auxiliary quantities of the row problem."""
    if exact_branch_threshold(eta_hat, eta):
        return zeta / np.sqrt(eta) - zeta_hat
    u = 4.0 * eta / (eta_hat.real**2 + eta_hat.imag**2)
    # 1 - sqrt(1 + u) written without cancellation
    scale = (eta_hat / (2.0 * eta)) * (-u / (1.0 + np.sqrt(1.0 + u)))
    return scale * zeta - zeta_hat


def update_row(W, stats, i, n, regularize_q=True):
    """Minimize the objective over ``w_in`` with all other rows fixed.

    Args:
        W: demixing matrices (I, N, M); not modified.
        stats: :class:`VcdStatistics` of source ``n``.
        i, n: bin and source of the row.
        regularize_q: add the trace-scaled ridge to ``Q_in`` before inversion.

    Returns:
        The new column vector ``w_in`` (store ``w.conj()`` into ``W[i, n]``).

    Raises:
        IllConditionedUpdateError: ``Q_in`` or ``W_i Q_in`` is singular.
    """
    Q = stats.Q[i]
    if regularize_q:
        Q = regularize(Q)
    gamma = stats.gamma[i]
    n_ch = Q.shape[0]
    WQ = W[i] @ Q
    for name, mat in (("Q", Q), ("W Q", WQ)):
        if not np.all(np.isfinite(mat)) or np.linalg.cond(mat) > 1e14:
            raise IllConditionedUpdateError(f"{name} is ill-conditioned at bin {i}, source {n}", i, n)
    e_n = np.zeros(n_ch, dtype=np.complex128)
    e_n[n] = 1.0
    zeta = np.linalg.solve(WQ, e_n)
    zeta_hat = np.linalg.solve(Q, gamma)
    eta = np.vdot(zeta, Q @ zeta).real
    if not eta > 0:
        raise IllConditionedUpdateError(f"non-positive eta at bin {i}, source {n}", i, n)
    eta_hat = np.vdot(zeta, Q @ zeta_hat)
    return closed_form_row(zeta, zeta_hat, eta, eta_hat)


def row_objective(w, W, Q, gamma, i, n):
    """``w^H Q w + 2 Re(w^H gamma) - log |det W_i|^2`` with row ``n`` set to ``w^H``."""
    Wi = W[i].copy()
    Wi[n] = np.conj(w)
    quad = np.vdot(w, Q @ w).real + 2.0 * np.vdot(w, gamma).real
    return float(quad - 2.0 * np.log(np.abs(np.linalg.det(Wi))))


def sweep_reference(X, W, fcm, cache):
    """One VCD sweep recomputing the statistics from scratch before every row.

    Slow (O(I^2 J M) per source); kept as a readable counterpart of
    :func:`sweep`. Updates ``W`` in place and returns the skipped rows.
    """
    skipped = []
    n_bins, n_src = W.shape[0], W.shape[1]
    for n in range(n_src):
        for i in range(n_bins):
            stats = compute_statistics(X, W, fcm, cache, n)
            try:
                w = update_row(W, stats, i, n)
            except IllConditionedUpdateError:
                skipped.append((i, n))
                continue
            W[i, n] = w.conj()
    return skipped


@numba.njit(cache=True)
def _solve_small(A, b):
    """Gaussian elimination with partial pivoting; flag is False when singular."""
    m = A.shape[0]
    a = A.copy()
    x = b.copy()
    scale = 0.0
    for r in range(m):
        for c in range(m):
            scale = max(scale, abs(a[r, c]))
    if not scale > 0.0 or not np.isfinite(scale):
        return x, False
    for k in range(m):
        p = k
        for r in range(k + 1, m):
            if abs(a[r, k]) > abs(a[p, k]):
                p = r
        if abs(a[p, k]) <= 1e-14 * scale:
            return x, False
        if p != k:
            for c in range(m):
                tmp = a[k, c]
                a[k, c] = a[p, c]
                a[p, c] = tmp
            tmp = x[k]
            x[k] = x[p]
            x[p] = tmp
        for r in range(k + 1, m):
            f = a[r, k] / a[k, k]
            for c in range(k, m):
                a[r, c] -= f * a[k, c]
            x[r] -= f * x[k]
    for k in range(m - 1, -1, -1):
        acc = x[k]
        for c in range(k + 1, m):
            acc -= a[k, c] * x[c]
        x[k] = acc / a[k, k]
    return x, True


@numba.njit(cache=True)
def _sweep_kernel(X, W, Q, zhat, coef, skipped):
    n_bins, n_frames, n_ch = X.shape
    n_src = W.shape[1]
    conj_y = np.empty((n_bins, n_frames), dtype=np.complex128)
    c = np.empty(n_frames, dtype=np.complex128)
    gamma = np.empty(n_ch, dtype=np.complex128)
    e_n = np.zeros(n_ch, dtype=np.complex128)
    WQ = np.empty((n_ch, n_ch), dtype=np.complex128)
    Qz = np.empty(n_ch, dtype=np.complex128)
    for n in range(n_src):
        for i in range(n_bins):
            for j in range(n_frames):
                acc = 0j
                for m in range(n_ch):
                    acc += W[i, n, m] * X[i, j, m]
                conj_y[i, j] = np.conj(acc)
        for j in range(n_frames):
            acc = 0j
            for i in range(n_bins):
                acc += zhat[i, j, n] * conj_y[i, j]
            c[j] = acc
        for m in range(n_ch):
            e_n[m] = 0.0
        e_n[n] = 1.0
        for i in range(n_bins):
            for m in range(n_ch):
                gamma[m] = 0.0
            if coef != 0.0:
                for j in range(n_frames):
                    zh = zhat[i, j, n]
                    h = -coef * np.conj(zh) * (c[j] - zh * conj_y[i, j])
                    for m in range(n_ch):
                        gamma[m] += h * X[i, j, m]
                for m in range(n_ch):
                    gamma[m] /= n_frames
            Qi = Q[i, n]
            for r in range(n_ch):
                for k in range(n_ch):
                    acc = 0j
                    for m in range(n_ch):
                        acc += W[i, r, m] * Qi[m, k]
                    WQ[r, k] = acc
            zeta, ok1 = _solve_small(WQ, e_n)
            zeta_hat, ok2 = _solve_small(Qi, gamma)
            if not (ok1 and ok2):
                skipped[i, n] = True
                continue
            eta = 0.0
            eta_hat = 0j
            for r in range(n_ch):
                acc = 0j
                acc2 = 0j
                for k in range(n_ch):
                    acc += Qi[r, k] * zeta[k]
                    acc2 += Qi[r, k] * zeta_hat[k]
                Qz[r] = acc
                eta += (np.conj(zeta[r]) * acc).real
                eta_hat += np.conj(zeta[r]) * acc2
            if not (eta > 0.0 and np.isfinite(eta)):
                skipped[i, n] = True
                continue
            if abs(eta_hat) <= 1e-12 * np.sqrt(eta):
                scale = 1.0 / np.sqrt(eta) + 0j
            else:
                u = 4.0 * eta / (eta_hat.real**2 + eta_hat.imag**2)
                scale = (eta_hat / (2.0 * eta)) * (-u / (1.0 + np.sqrt(1.0 + u)))
            finite = True
            for m in range(n_ch):
                wm = scale * zeta[m] - zeta_hat[m]
                if not (np.isfinite(wm.real) and np.isfinite(wm.imag)):
                    finite = False
                Qz[m] = wm
            if not finite:
                skipped[i, n] = True
                continue
            for m in range(n_ch):
                W[i, n, m] = np.conj(Qz[m])
            for j in range(n_frames):
                acc = 0j
                for m in range(n_ch):
                    acc += np.conj(X[i, j, m]) * Qz[m]
                c[j] += zhat[i, j, n] * (acc - conj_y[i, j])
                conj_y[i, j] = acc


def sweep(X, W, fcm, cache, Q_reg):
    """One VCD sweep (sources outer, bins inner, ascending), in place on ``W``.

    Args:
        X: mixture spectra (I, J, M).
        W: demixing matrices (I, N, M), complex128, C-contiguous.
        fcm, cache: current FCMs and their inverse cache.
        Q_reg: ``regularize(weighted_covariance(X, fcm, cache))``.

    Returns:
        List of ``(i, n)`` rows skipped as ill-conditioned.
    """
    alpha = fcm.alpha
    coef = alpha / (1.0 - alpha)
    skipped = np.zeros(W.shape[:2], dtype=np.bool_)
    _sweep_kernel(np.ascontiguousarray(X, dtype=np.complex128), W,
                  np.ascontiguousarray(Q_reg), np.ascontiguousarray(cache.zhat), coef, skipped)
    return [tuple(int(v) for v in idx) for idx in np.argwhere(skipped)]


@numba.njit(cache=True)
def _diagonal_kernel(W, Q, skipped):
    n_bins, n_src, n_ch = W.shape
    e_n = np.zeros(n_ch, dtype=np.complex128)
    WQ = np.empty((n_ch, n_ch), dtype=np.complex128)
    for n in range(n_src):
        for m in range(n_ch):
            e_n[m] = 0.0
        e_n[n] = 1.0
        for i in range(n_bins):
            Qi = Q[i, n]
            for r in range(n_ch):
                for k in range(n_ch):
                    acc = 0j
                    for m in range(n_ch):
                        acc += W[i, r, m] * Qi[m, k]
                    WQ[r, k] = acc
            zeta, ok = _solve_small(WQ, e_n)
            if not ok:
                skipped[i, n] = True
                continue
            eta = 0.0
            for r in range(n_ch):
                acc = 0j
                for k in range(n_ch):
                    acc += Qi[r, k] * zeta[k]
                eta += (np.conj(zeta[r]) * acc).real
            if not (eta > 0.0 and np.isfinite(eta)):
                skipped[i, n] = True
                continue
            scale = 1.0 / np.sqrt(eta) + 0j
            for m in range(n_ch):
                W[i, n, m] = np.conj(scale * zeta[m])


def diagonal_sweep(W, Q_reg):
    """Sweep for diagonal FCMs (``alpha = 0``), in place on ``W``.

    Without cross-frequency coupling every ``gamma_in`` vanishes and the update
    reduces to ``w = zeta / sqrt(eta)``; bins are independent of each other.
    Returns the skipped ``(i, n)`` rows.
    """
    skipped = np.zeros(W.shape[:2], dtype=np.bool_)
    _diagonal_kernel(W, np.ascontiguousarray(Q_reg), skipped)
    return [tuple(int(v) for v in idx) for idx in np.argwhere(skipped)]
