import numpy as np
import pytest

from idlta.fcm import FcmSeries, dense_fcm
from idlta.stft import StftConfig

ACCEPTANCE_LINES = []


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_fcm(rng, n_bins, n_frames, n_src, alpha, low=0.1, high=2.0):
    shape = (n_bins, n_frames, n_src)
    return FcmSeries(rng.uniform(low, high, shape), crandn(rng, *shape), alpha)


def random_problem(rng, n_bins, n_frames, n_ch, alpha):
    X = crandn(rng, n_bins, n_frames, n_ch)
    W = crandn(rng, n_bins, n_ch, n_ch)
    return X, W, random_fcm(rng, n_bins, n_frames, n_ch, alpha)


def max_rel(a, b):
    scale = np.max(np.abs(b))
    return np.max(np.abs(a - b)) / (scale if scale > 0 else 1.0)


def double_loop_statistics(X, W, fcm, n):
    """Literal sums over j and i' with dense inverses from a generic solver."""
    I, J, M = X.shape
    Q = np.zeros((I, M, M), dtype=complex)
    gamma = np.zeros((I, M), dtype=complex)
    Rinv = [np.linalg.inv(dense_fcm(fcm, j, n)) for j in range(J)]
    for i in range(I):
        for j in range(J):
            x = X[i, j]
            Q[i] += Rinv[j][i, i] * np.outer(x, x.conj()) / J
            acc = 0j
            for ip in range(I):
                if ip != i:
                    acc += Rinv[j][ip, i] * np.vdot(X[ip, j], W[ip, n].conj())
            gamma[i] += acc * x / J
    return Q, gamma


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_stft():
    return StftConfig(window_length_samples=256, hop_samples=128, window_kind="hamming",
                      sample_rate_hz=8000)


@pytest.fixture
def acceptance():
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
