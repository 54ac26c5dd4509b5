import numpy as np
import pytest
from conftest import crandn, random_fcm
from hypothesis import given, settings
from hypothesis import strategies as st

from idlta.errors import DegenerateDemixingError, InvalidInputError, ModelDomainError
from idlta.fcm import (
    FcmSeries,
    build_inverse_cache,
    dense_fcm,
    dense_inverse_from_cache,
    inverse_entry,
    log_det,
    log_det_all,
    source_nll,
    total_objective,
)


def test_alpha_zero_reduces_to_diagonal_inverse(rng):
    fcm = random_fcm(rng, 5, 2, 1, 0.0)
    cache = build_inverse_cache(fcm)
    assert np.all(cache.xi == 1.0)
    np.testing.assert_array_equal(cache.zhat, fcm.rank1_vec / fcm.diag_power)
    for i in range(5):
        assert inverse_entry(cache, fcm, i, i, 1, 0) == pytest.approx(1 / fcm.diag_power[i, 1, 0])
        for k in range(5):
            if k != i:
                assert inverse_entry(cache, fcm, k, i, 1, 0) == 0


def test_zero_rank1_half_alpha():
    fcm = FcmSeries(np.array([1.0, 2.0]).reshape(2, 1, 1), np.zeros((2, 1, 1)), 0.5)
    cache = build_inverse_cache(fcm)
    np.testing.assert_allclose(dense_inverse_from_cache(cache, fcm, 0, 0), np.diag([2.0, 1.0]))
    assert inverse_entry(cache, fcm, 1, 0, 0, 0) == 0


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 0.9, 0.99])
def test_inverse_matches_dense_solver(rng, alpha):
    fcm = random_fcm(rng, 4, 3, 2, alpha)
    cache = build_inverse_cache(fcm)
    for j in range(3):
        for n in range(2):
            oracle = np.linalg.inv(dense_fcm(fcm, j, n))
            fast = np.array([[inverse_entry(cache, fcm, a, b, j, n) for b in range(4)] for a in range(4)])
            assert np.max(np.abs(fast - oracle)) <= 1e-10 * np.max(np.abs(oracle))


def test_log_det_examples():
    ones = FcmSeries(np.ones((3, 1, 1)), crandn(np.random.default_rng(0), 3, 1, 1), 0.0)
    assert log_det(ones, 0, 0) == pytest.approx(0.0, abs=1e-15)
    half = FcmSeries(np.ones((2, 1, 1)), np.zeros((2, 1, 1)), 0.5)
    assert log_det(half, 0, 0) == pytest.approx(2 * np.log(0.5))


def test_log_det_matches_dense(rng):
    fcm = random_fcm(rng, 5, 4, 2, 0.7)
    logdets = log_det_all(fcm)
    for j in range(4):
        for n in range(2):
            sign, ref = np.linalg.slogdet(dense_fcm(fcm, j, n))
            assert sign.real > 0
            assert abs(logdets[j, n] - ref) < 1e-9
            assert abs(log_det(fcm, j, n) - ref) < 1e-9


def test_source_nll_examples(rng):
    fcm = random_fcm(rng, 6, 2, 2, 0.4)
    cache = build_inverse_cache(fcm)
    assert source_nll(np.zeros(6), fcm, cache, 1, 1) == pytest.approx(log_det(fcm, 1, 1))

    diag = random_fcm(rng, 6, 1, 1, 0.0)
    y = crandn(rng, 6)
    d2 = diag.diag_power[:, 0, 0]
    expected = np.sum(np.abs(y) ** 2 / d2 + np.log(d2))
    assert source_nll(y, diag, build_inverse_cache(diag), 0, 0) == pytest.approx(expected, rel=1e-12)


def test_source_nll_matches_dense(rng):
    fcm = random_fcm(rng, 6, 2, 1, 0.6)
    cache = build_inverse_cache(fcm)
    y = crandn(rng, 6)
    R = dense_fcm(fcm, 1, 0)
    ref = np.vdot(y, np.linalg.solve(R, y)).real + np.linalg.slogdet(R)[1]
    assert source_nll(y, fcm, cache, 1, 0) == pytest.approx(ref, rel=1e-9)


def test_total_objective_identity_demixing(rng):
    X = crandn(rng, 4, 3, 2)
    fcm = FcmSeries(np.abs(X) ** 2, crandn(rng, 4, 3, 2), 0.0)
    W = np.broadcast_to(np.eye(2, dtype=complex), (4, 2, 2))
    assert total_objective(X, W, fcm) == pytest.approx(np.sum(1 + np.log(np.abs(X) ** 2)), rel=1e-12)


def test_total_objective_matches_dense(rng):
    I, J, M = 4, 3, 2
    X = crandn(rng, I, J, M)
    W = crandn(rng, I, M, M)
    fcm = random_fcm(rng, I, J, M, 0.5)
    Y = np.einsum("inm,ijm->ijn", W, X)
    ref = 0.0
    for j in range(J):
        for n in range(M):
            R = dense_fcm(fcm, j, n)
            y = Y[:, j, n]
            ref += np.vdot(y, np.linalg.solve(R, y)).real + np.linalg.slogdet(R)[1]
    ref -= J * sum(np.log(np.abs(np.linalg.det(W[i])) ** 2) for i in range(I))
    assert total_objective(X, W, fcm) == pytest.approx(ref, rel=1e-9)


def test_total_objective_quadratic_scaling(rng):
    X = crandn(rng, 4, 3, 2)
    W = crandn(rng, 4, 2, 2)
    fcm = random_fcm(rng, 4, 3, 2, 0.3)
    base = total_objective(X, W, fcm)
    logdet_part = total_objective(np.zeros_like(X), W, fcm)
    scaled = total_objective(3.0 * X, W, fcm)
    assert scaled - logdet_part == pytest.approx(9.0 * (base - logdet_part), rel=1e-12)


def test_singular_demixing_rejected(rng):
    X = crandn(rng, 2, 3, 2)
    W = np.zeros((2, 2, 2), dtype=complex)
    W[:, 0, 0] = 1
    with pytest.raises(DegenerateDemixingError):
        total_objective(X, W, random_fcm(rng, 2, 3, 2, 0.2))


def test_domain_errors(rng):
    with pytest.raises(ModelDomainError):
        random_fcm(rng, 2, 1, 1, 1.0)
    with pytest.raises(ModelDomainError):
        FcmSeries(np.zeros((2, 1, 1)), np.zeros((2, 1, 1)), 0.1)
    with pytest.raises(InvalidInputError):
        FcmSeries(np.ones((2, 1, 1)), np.full((2, 1, 1), np.nan), 0.1)


fcm_cases = st.tuples(
    st.integers(2, 16), st.sampled_from([0.0, 0.3, 0.5, 0.9, 0.99]), st.integers(0, 2**31 - 1)
)


@settings(max_examples=60, deadline=None)
@given(fcm_cases)
def test_dense_product_is_identity(case):
    n_bins, alpha, seed = case
    rng = np.random.default_rng(seed)
    fcm = random_fcm(rng, n_bins, 1, 1, alpha)
    cache = build_inverse_cache(fcm)
    prod = dense_fcm(fcm, 0, 0) @ dense_inverse_from_cache(cache, fcm, 0, 0)
    assert np.max(np.abs(prod - np.eye(n_bins))) < 1e-9


@settings(max_examples=60, deadline=None)
@given(fcm_cases)
def test_xi_bounds_and_min_eigenvalue(case):
    n_bins, alpha, seed = case
    rng = np.random.default_rng(seed)
    fcm = random_fcm(rng, n_bins, 1, 1, alpha)
    xi = build_inverse_cache(fcm).xi[0, 0]
    assert 0 < xi <= (1 - alpha) ** -0.5 * (1 + 1e-15)
    eig = np.linalg.eigvalsh(dense_fcm(fcm, 0, 0))
    assert eig[0] >= (1 - alpha) * fcm.diag_power.min() * (1 - 1e-12)


def test_xi_maximal_iff_rank1_zero(rng):
    d2 = rng.uniform(0.5, 1.5, (3, 2, 1))
    z = np.zeros((3, 2, 1), dtype=complex)
    z[1, 1, 0] = 0.1
    cache = build_inverse_cache(FcmSeries(d2, z, 0.4))
    assert cache.xi[0, 0] == 0.6**-0.5
    assert cache.xi[1, 0] < 0.6**-0.5


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.floats(0.0, 0.99), st.floats(-np.pi, np.pi), st.integers(0, 2**31 - 1))
def test_nll_phase_rotation_invariance(n_bins, alpha, theta, seed):
    rng = np.random.default_rng(seed)
    fcm = random_fcm(rng, n_bins, 1, 1, alpha)
    y = crandn(rng, n_bins)
    phase = np.exp(1j * theta)
    rotated = FcmSeries(fcm.diag_power, fcm.rank1_vec * phase, alpha)
    a = source_nll(y, fcm, build_inverse_cache(fcm), 0, 0)
    b = source_nll(y * phase, rotated, build_inverse_cache(rotated), 0, 0)
    assert b == pytest.approx(a, rel=1e-12, abs=1e-12)
