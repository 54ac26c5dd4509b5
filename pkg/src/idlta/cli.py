"""Command-line interface: ``idlta {mix,separate,eval,bench}``.

Every failure prints one JSON line ``{"error": kind, "message": text}`` on
stderr and exits nonzero.
"""

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import audio_io
from .errors import ConfigurationError, IdltaError, InvalidInputError
from .estimators import FileBackedEstimator, OracleEstimator, PassthroughEstimator
from .evaluation import align_and_score
from .fcm import FcmSeries, build_inverse_cache
from .mixsim import MixSpec, mix, validate_narrowband
from .pipeline import SeparationConfig, separate
from .stft import StftConfig
from .vcd import compute_statistics, direct_statistics

MAX_DIRECT_BINS = 1025


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message)
        sys.exit(2)


def _emit_error(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")


def _write_json(doc, path):
    text = json.dumps(doc, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read_all(paths):
    return [audio_io.read_wav(p) for p in paths]


def cmd_mix(args):
    if (args.matrix is None) == (args.irs is None):
        raise ConfigurationError("give exactly one of --matrix or --irs")
    n_src = len(args.sources)
    if args.matrix is not None:
        try:
            values = [float(v) for v in args.matrix.split(",")]
        except ValueError as exc:
            raise InvalidInputError(f"--matrix must be comma-separated numbers ({exc})") from exc
        if len(values) != n_src * n_src:
            raise InvalidInputError(f"--matrix needs {n_src * n_src} entries for {n_src} sources")
        spec = MixSpec("instantaneous", matrix=np.array(values).reshape(n_src, n_src),
                       normalization=args.normalization)
    else:
        if len(args.irs) != n_src:
            raise InvalidInputError(f"--irs needs one file per source ({n_src})")
        irs = _read_all(args.irs)
        taps = {ir.length for ir in irs}
        if len(taps) != 1 or any(ir.n_channels != n_src for ir in irs):
            raise InvalidInputError("impulse-response files must share a length and have M = N channels")
        h = np.stack([ir.samples for ir in irs], axis=1)
        spec = MixSpec("convolutive", impulse_responses=h, normalization=args.normalization)
    sources = _read_all(args.sources)
    mixture = mix(sources, spec)
    if spec.mode == "convolutive":
        validate_narrowband(spec, StftConfig.from_ms(args.win_ms, args.win_ms / 2, mixture.sample_rate_hz))
    audio_io.write_wav(mixture, args.out, args.format)
    if args.manifest:
        base = Path(args.manifest).resolve().parent
        rel = lambda p: os.path.relpath(Path(p).resolve(), base)  # noqa: E731
        audio_io.Manifest(
            mixture=rel(args.out),
            sources=[rel(p) for p in args.sources],
            sample_rate_hz=mixture.sample_rate_hz,
        ).save(args.manifest)
    return 0


def _build_estimator(args, manifest):
    refs = args.refs or (manifest.sources if manifest else None)
    if args.estimator == "oracle":
        if not refs:
            raise ConfigurationError("oracle estimator needs --refs (or a manifest with sources)")
        return OracleEstimator(_read_all(refs))
    if args.estimator == "file":
        spectra = args.spectra or (manifest.spectra if manifest else None)
        estimates = args.estimates or (manifest.estimates if manifest else None)
        return FileBackedEstimator(spectra, estimates)
    return PassthroughEstimator()


def cmd_separate(args):
    if not 0.0 <= args.alpha < 1.0:
        raise ConfigurationError(f"--alpha must lie in [0, 1), got {args.alpha}")
    manifest = audio_io.Manifest.load(args.manifest) if args.manifest else None
    mix_path = args.mix or (manifest.mixture if manifest else None)
    if mix_path is None:
        raise ConfigurationError("--mix (or --manifest) is required")
    mixture = audio_io.read_wav(mix_path)
    stft = StftConfig.from_ms(args.win_ms, args.hop_ms, mixture.sample_rate_hz, args.window)
    config = SeparationConfig(
        alpha=args.alpha,
        estimator=_build_estimator(args, manifest),
        total_iterations=args.iters,
        fcm_refresh_period=args.fcm_refresh,
        stft=stft,
        reference_channel=args.ref_channel,
        record_objective=True,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = separate(mixture, config)
    names = []
    for n, sig in enumerate(result.separated):
        name = f"source_{n}.wav"
        audio_io.write_wav(sig, out_dir / name, args.format)
        names.append(name)
    trace = {
        "alpha": args.alpha,
        "iterations_run": result.iterations_run,
        "fcm_refresh_period": args.fcm_refresh,
        "refresh_iterations": result.refresh_iterations,
        "objective": result.objective_trace,
        "skipped_rows": result.skipped_rows,
        "outputs": names,
    }
    _write_json(trace, args.trace or out_dir / "trace.json")
    if args.figure:
        from .plotting import plot_objective_trace
        plot_objective_trace(result.objective_trace, result.refresh_iterations, args.figure,
                             title=f"alpha = {args.alpha:g}")
    return 0


def cmd_eval(args):
    estimates, refs = _read_all(args.estimates), _read_all(args.refs)
    mixture = audio_io.read_wav(args.mix)
    lengths = {s.length for s in estimates + refs + [mixture]}
    if len(lengths) != 1:
        raise InvalidInputError(f"signals differ in length: {sorted(lengths)}")
    report = align_and_score(estimates, refs, mixture, args.ref_channel)
    _write_json(report.to_dict(), args.out)
    if args.figure:
        from .plotting import plot_sdr_report
        plot_sdr_report(report, args.figure)
    return 0


def _random_problem(rng, n_bins, n_frames, n_ch, alpha):
    shape = (n_bins, n_frames, n_ch)
    crandn = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)  # noqa: E731
    X = crandn(*shape)
    W = crandn(n_bins, n_ch, n_ch)
    fcm = FcmSeries(rng.uniform(0.1, 2.0, shape), crandn(*shape), alpha)
    return X, W, fcm


def _time_best(fn, repeat):
    best, value = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def run_bench(alpha, n_bins, n_frames, n_ch, repeat, seed=0, max_direct_bins=MAX_DIRECT_BINS):
    rng = np.random.default_rng(seed)
    X, W, fcm = _random_problem(rng, n_bins, n_frames, n_ch, alpha)

    def accelerated():
        cache = build_inverse_cache(fcm)
        return [compute_statistics(X, W, fcm, cache, n) for n in range(n_ch)]

    def direct():
        return [direct_statistics(X, W, fcm, n) for n in range(n_ch)]

    t_acc, fast = _time_best(accelerated, repeat)
    doc = {
        "alpha": alpha, "freq_bins": n_bins, "frames": n_frames, "channels": n_ch,
        "repeat": repeat, "accelerated_seconds": t_acc, "direct_seconds": None,
        "speedup": None, "max_abs_diff": None, "direct_skipped": n_bins > max_direct_bins,
    }
    if not doc["direct_skipped"]:
        t_dir, slow = _time_best(direct, repeat)
        diff = max(max(np.abs(a.Q - b.Q).max(), np.abs(a.gamma - b.gamma).max())
                   for a, b in zip(fast, slow))
        doc.update(direct_seconds=t_dir, speedup=t_dir / t_acc, max_abs_diff=float(diff))
    return doc


def cmd_bench(args):
    if not 0.0 <= args.alpha < 1.0:
        raise ConfigurationError(f"--alpha must lie in [0, 1), got {args.alpha}")
    doc = run_bench(args.alpha, args.freq_bins, args.frames, args.channels, args.repeat, args.seed)
    if doc["direct_skipped"]:
        sys.stderr.write(f"notice: direct path skipped for {args.freq_bins} bins "
                         f"(limit {MAX_DIRECT_BINS})\n")
    _write_json(doc, None)
    return 0


def build_parser():
    parser = _Parser(prog="idlta", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mix", help="synthesize a determined mixture")
    p.add_argument("--sources", nargs="+", required=True)
    p.add_argument("--matrix", help="row-major M x N entries, comma separated")
    p.add_argument("--irs", nargs="+", help="one M-channel impulse-response WAV per source")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.add_argument("--format", choices=("float32", "pcm16"), default="float32")
    p.add_argument("--normalization", choices=("none", "unit_source_power"), default="none")
    p.add_argument("--win-ms", type=float, default=512.0, help="window used for the narrowband check")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("separate", help="run the demixing optimization")
    p.add_argument("--mix")
    p.add_argument("--manifest")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--fcm-refresh", type=int, default=10)
    p.add_argument("--estimator", choices=("oracle", "file", "passthrough"), default="oracle")
    p.add_argument("--refs", nargs="+")
    p.add_argument("--spectra")
    p.add_argument("--estimates", nargs="+")
    p.add_argument("--win-ms", type=float, default=512.0)
    p.add_argument("--hop-ms", type=float, default=256.0)
    p.add_argument("--window", choices=("hamming", "hann", "sqrt_hann"), default="hamming")
    p.add_argument("--ref-channel", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trace")
    p.add_argument("--format", choices=("float32", "pcm16"), default="float32")
    p.add_argument("--figure", help="write the objective trace plot to this path")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("eval", help="score separated signals")
    p.add_argument("--estimates", nargs="+", required=True)
    p.add_argument("--refs", nargs="+", required=True)
    p.add_argument("--mix", required=True)
    p.add_argument("--ref-channel", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--figure", help="write an SDR bar chart to this path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time accelerated vs dense statistics")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--freq-bins", type=int, default=513)
    p.add_argument("--frames", type=int, default=120)
    p.add_argument("--channels", type=int, default=2)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IdltaError as exc:
        _emit_error(exc.kind, exc)
    except (OSError, ValueError) as exc:
        _emit_error(type(exc).__name__, exc)
    return 1


if __name__ == "__main__":
    sys.exit(main())
