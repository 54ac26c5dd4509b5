"""Report figures written next to the JSON outputs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.0, 3.6)
_METADATA = {"Software": None}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_METADATA)
    plt.close(fig)
    return path


def plot_objective_trace(trace, refresh_iterations, path, title=None):
    """Objective after each sweep, with FCM refreshes marked as vertical lines."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    it = np.arange(1, len(trace) + 1)
    ax.plot(it, trace, color="k", lw=1.2)
    for t in refresh_iterations:
        ax.axvline(t + 1, color="0.7", lw=0.8, ls="--")
    ax.set_xlabel("iteration")
    ax.set_ylabel("negative log-likelihood")
    if title:
        ax.set_title(title)
    return _finish(fig, path)


def plot_sdr_report(report, path, labels=None):
    """Per-source SDR and SDR improvement bars for one :class:`EvalReport`."""
    n = len(report.sdr_per_source)
    labels = labels or [f"source {k}" for k in range(n)]
    x = np.arange(n)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.bar(x - 0.18, report.sdr_per_source, width=0.36, label="SDR", color="0.3")
    ax.bar(x + 0.18, report.sdr_improvement_per_source, width=0.36, label="improvement", color="0.7")
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylabel(f"{report.metric} [dB]")
    ax.legend(frameon=False)
    return _finish(fig, path)


def plot_alpha_sweep(alphas, mean_improvements, path):
    """Mean SDR improvement against the rank-1 weight."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(alphas, mean_improvements, "o-", color="k")
    ax.set_xlabel("alpha")
    ax.set_ylabel("mean SDR improvement [dB]")
    return _finish(fig, path)
