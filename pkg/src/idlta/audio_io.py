"""WAV, tensor and manifest files.

WAV decoding and encoding go through :mod:`scipy.io.wavfile`; only 16-bit PCM
and 32-bit IEEE float are accepted. Tensor files use a small fixed binary
layout::

    magic   4s   b"IDLT"
    version u32  1
    kind    u8   0 = real, 1 = complex
    dims    3 x u32  (I, J, N)
    payload little-endian float64, i fastest; complex interleaved (re, im)
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ConfigurationError, FormatError, IdltaError
from .stft import TimeSignal

TENSOR_MAGIC = b"IDLT"
TENSOR_VERSION = 1
_HEADER = struct.Struct("<4sIB3I")

PCM16_MAX = 1.0 - 2.0**-15


def _describe_chunks(path):
    """Best-effort list of RIFF chunk ids for error messages."""
    try:
        raw = Path(path).read_bytes()
    except OSError:
        return "unreadable"
    if raw[:4] not in (b"RIFF", b"RIFX") or raw[8:12] != b"WAVE":
        return f"header {raw[:12]!r}"
    chunks, pos = [], 12
    while pos + 8 <= len(raw):
        cid, size = raw[pos:pos + 4], struct.unpack("<I", raw[pos + 4:pos + 8])[0]
        info = cid.decode("latin-1")
        if cid == b"fmt " and size >= 16:
            tag, ch, rate, _, _, bits = struct.unpack("<HHIIHH", raw[pos + 8:pos + 24])
            info += f"(format_tag={tag}, channels={ch}, rate={rate}, bits={bits})"
        chunks.append(info)
        pos += 8 + size + (size & 1)
    return ", ".join(chunks)


def read_wav(path):
    """Read a PCM16 or float32 WAV file into a :class:`TimeSignal`.

    PCM16 samples are divided by 32768; float32 samples are widened exactly.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, struct.error) as exc:
        raise FormatError(f"{path}: cannot decode WAV ({exc}); chunks: {_describe_chunks(path)}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise FormatError(
            f"{path}: unsupported sample type {data.dtype}; chunks: {_describe_chunks(path)}"
        )
    samples = samples.reshape(samples.shape[0], -1).T
    return TimeSignal(samples, rate)


def write_wav(signal, path, format="float32"):
    """Write ``signal`` as ``pcm16`` (clamped, rounded) or ``float32``."""
    samples = signal.samples
    if format == "float32":
        data = samples.T.astype(np.float32)
    elif format == "pcm16":
        clipped = np.clip(samples, -1.0, PCM16_MAX)
        data = np.round(clipped * 32768.0).astype(np.int16).T
    else:
        raise ConfigurationError(f"unknown WAV format {format!r}")
    if data.shape[1] == 1:
        data = data[:, 0]
    try:
        wavfile.write(path, signal.sample_rate_hz, np.ascontiguousarray(data))
    except OSError as exc:
        raise IdltaError(f"{path}: write failed ({exc})") from exc


def write_tensor(array, path):
    array = np.asarray(array)
    if array.ndim != 3:
        raise FormatError(f"tensor must be 3-D (I, J, N), got shape {array.shape}")
    is_complex = np.iscomplexobj(array)
    if is_complex:
        payload = np.empty(array.shape + (2,), dtype="<f8")
        payload[..., 0] = array.real
        payload[..., 1] = array.imag
    else:
        payload = array.astype("<f8")
    # i is the fastest-varying index on disk.
    order = (2, 1, 0, 3) if is_complex else (2, 1, 0)
    body = np.ascontiguousarray(payload.transpose(order)).tobytes()
    header = _HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, int(is_complex), *array.shape)
    Path(path).write_bytes(header + body)


def read_tensor(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file too short for tensor header")
    magic, version, kind, I, J, N = _HEADER.unpack_from(raw)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != TENSOR_VERSION:
        raise FormatError(f"{path}: unsupported tensor version {version}")
    if kind not in (0, 1):
        raise FormatError(f"{path}: unknown tensor kind {kind}")
    expected = 8 * (kind + 1) * I * J * N
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise FormatError(f"{path}: payload has {len(body)} bytes, expected {expected}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    if kind:
        stacked = flat.reshape(N, J, I, 2).transpose(2, 1, 0, 3)
        return stacked[..., 0] + 1j * stacked[..., 1]
    return np.ascontiguousarray(flat.reshape(N, J, I).transpose(2, 1, 0))


@dataclass
class Manifest:
    """Binds a mixture to its source references and optional estimator files."""

    mixture: str
    sources: list
    sample_rate_hz: int
    estimates: list = field(default_factory=list)
    spectra: str = None

    FIELDS = ("mixture", "sources", "sample_rate_hz", "estimates", "spectra")

    def to_dict(self):
        return {
            "mixture": self.mixture,
            "sources": list(self.sources),
            "sample_rate_hz": self.sample_rate_hz,
            "estimates": list(self.estimates),
            "spectra": self.spectra,
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path, check_files=True):
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid manifest ({exc})") from exc
        unknown = set(doc) - set(cls.FIELDS)
        missing = {"mixture", "sources", "sample_rate_hz"} - set(doc)
        if unknown or missing:
            raise FormatError(f"{path}: unknown keys {sorted(unknown)}, missing {sorted(missing)}")
        base = Path(path).parent
        resolve = lambda p: str(base / p) if p is not None else None  # noqa: E731
        manifest = cls(
            mixture=resolve(doc["mixture"]),
            sources=[resolve(p) for p in doc["sources"]],
            sample_rate_hz=int(doc["sample_rate_hz"]),
            estimates=[resolve(p) for p in doc.get("estimates") or []],
            spectra=resolve(doc.get("spectra")),
        )
        if check_files:
            manifest.validate()
        return manifest

    def validate(self):
        wavs = [self.mixture, *self.sources, *self.estimates]
        for p in wavs + ([self.spectra] if self.spectra else []):
            if not Path(p).exists():
                raise ConfigurationError(f"manifest references missing file {p}")
        for p in wavs:
            rate = read_wav(p).sample_rate_hz
            if rate != self.sample_rate_hz:
                raise ConfigurationError(
                    f"{p} has sample rate {rate}, manifest says {self.sample_rate_hz}"
                )
