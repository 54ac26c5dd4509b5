"""Scale-invariant SDR with permutation alignment.

The distortion measure projects the estimate onto the reference with a single
gain (no distortion filter), so it is the scale-invariant SDR.
"""

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError

SDR_CAP_DB = 80.0
METRIC_NAME = "si-sdr"


def _mono(signal):
    samples = signal.samples if hasattr(signal, "samples") else np.atleast_2d(signal)
    return np.asarray(samples[0], dtype=np.float64)


def sdr(estimate, reference):
    """Scale-invariant SDR in dB, clipped to [-80, +80] dB."""
    est, ref = _mono(estimate), _mono(reference)
    if est.shape != ref.shape:
        raise InvalidInputError(f"length mismatch: estimate {est.size}, reference {ref.size}")
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0:
        raise InvalidInputError("reference signal is all zeros")
    target = (np.dot(est, ref) / ref_energy) * ref
    target_energy = np.dot(target, target)
    error = est - target
    error_energy = np.dot(error, error)
    if target_energy == 0:
        return -SDR_CAP_DB
    if error_energy == 0 or target_energy >= error_energy * 10 ** (SDR_CAP_DB / 10):
        return SDR_CAP_DB
    return float(max(10.0 * np.log10(target_energy / error_energy), -SDR_CAP_DB))


@dataclass
class EvalReport:
    """``permutation[k]`` is the index of the estimate matched to reference ``k``."""

    sdr_per_source: list
    sdr_improvement_per_source: list
    mean_sdr_improvement: float
    permutation: list
    baseline_sdr_per_source: list = field(default_factory=list)
    baseline: str = "reference_channel_mixture"
    metric: str = METRIC_NAME

    @property
    def mean_sdr(self):
        return float(np.mean(self.sdr_per_source))

    def to_dict(self):
        r4 = lambda v: round(float(v), 4)  # noqa: E731
        return {
            "metric": self.metric,
            "baseline": self.baseline,
            "permutation": [int(p) for p in self.permutation],
            "sdr_per_source": [r4(v) for v in self.sdr_per_source],
            "baseline_sdr_per_source": [r4(v) for v in self.baseline_sdr_per_source],
            "sdr_improvement_per_source": [r4(v) for v in self.sdr_improvement_per_source],
            "mean_sdr": r4(self.mean_sdr),
            "mean_sdr_improvement": r4(self.mean_sdr_improvement),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"


def best_permutation(scores):
    """Assignment maximizing the summed ``scores[k, e]`` (reference k, estimate e)."""
    n = scores.shape[0]
    if n <= 4:
        best = max(itertools.permutations(range(n)),
                   key=lambda p: sum(scores[k, p[k]] for k in range(n)))
        return list(best)
    rows, cols = linear_sum_assignment(scores, maximize=True)
    return [int(c) for _, c in sorted(zip(rows, cols))]


def align_and_score(estimates, references, mixture, reference_channel=0):
    """Match estimates to references and report SDR improvement over the mixture."""
    if len(estimates) != len(references):
        raise InvalidInputError(f"{len(estimates)} estimates for {len(references)} references")
    if not references:
        raise InvalidInputError("no references given")
    mix_ref = mixture.samples[reference_channel]
    scores = np.array([[sdr(e, r) for e in estimates] for r in references])
    perm = best_permutation(scores)
    per_source = [float(scores[k, perm[k]]) for k in range(len(references))]
    baseline = [sdr(mix_ref, r) for r in references]
    improvement = [s - b for s, b in zip(per_source, baseline)]
    return EvalReport(
        sdr_per_source=per_source,
        sdr_improvement_per_source=improvement,
        mean_sdr_improvement=float(np.mean(improvement)),
        permutation=perm,
        baseline_sdr_per_source=baseline,
    )
