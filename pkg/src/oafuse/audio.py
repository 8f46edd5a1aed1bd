"""Mono waveforms: WAV file I/O, pairwise alignment, and weighted fusion.

Fusion is a convex per-sample interpolation between a noisy signal and its
enhanced counterpart, either with one scalar weight for the whole utterance
or with a piecewise-constant per-frame weight vector. Samples are stored as
float32 (the on-disk float encoding), while the mixing arithmetic runs in
float64 so endpoint weights reproduce the inputs bit-exactly and every fused
sample stays inside [min(y, x), max(y, x)].
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import DataError

PathLike = Union[str, Path]

# Default tolerance for length mismatch between a noisy/enhanced pair:
# small codec-padding offsets are trimmed, anything larger is an error.
DEFAULT_MAX_LEN_MISMATCH_RATIO = 0.005

_PCM16_SCALE = 32768.0  # symmetric decode convention: amplitude = code / 32768


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono audio: a 1-D float32 sample array plus its sample rate."""

    sample_rate_hz: int
    samples: np.ndarray

    def __post_init__(self):
        if not isinstance(self.sample_rate_hz, (int, np.integer)) or self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be a positive integer, got {self.sample_rate_hz!r}")
        arr = np.array(self.samples, dtype=np.float32, copy=True)
        if arr.ndim != 1:
            raise ValueError(f"samples must be 1-D (mono), got shape {arr.shape}")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("samples contain NaN or Inf")
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))
        object.__setattr__(self, "samples", arr)
        arr.flags.writeable = False

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise DataError(f"truncated file: expected {n} bytes for {what}, got {len(buf)}")
    return buf


def load_wav(path: PathLike) -> Waveform:
    """Read a mono RIFF/WAVE file (16-bit PCM or 32-bit IEEE float).

    16-bit codes are scaled by 1/32768; float samples are taken verbatim.
    Unsupported encodings, multi-channel audio, and truncated files each
    raise a DataError naming the problem.
    """
    path = Path(path)
    with open(path, "rb") as f:
        riff = _read_exact(f, 12, "RIFF header")
        if riff[:4] != b"RIFF" or riff[8:12] != b"WAVE":
            raise DataError(f"{path}: not a RIFF/WAVE file")

        fmt = None
        while True:
            head = f.read(8)
            if len(head) == 0:
                raise DataError(f"{path}: truncated file: no data chunk")
            if len(head) < 8:
                raise DataError(f"{path}: truncated file: incomplete chunk header")
            chunk_id, size = struct.unpack("<4sI", head)
            if chunk_id == b"fmt ":
                body = _read_exact(f, size, "fmt chunk")
                if size < 16:
                    raise DataError(f"{path}: truncated file: fmt chunk too short")
                audio_format, channels, rate, _, _, bits = struct.unpack("<HHIIHH", body[:16])
                fmt = (audio_format, channels, rate, bits)
            elif chunk_id == b"data":
                if fmt is None:
                    raise DataError(f"{path}: data chunk precedes fmt chunk")
                audio_format, channels, rate, bits = fmt
                if channels != 1:
                    raise DataError(f"{path}: channel count unsupported (got {channels}, need mono)")
                if (audio_format, bits) == (1, 16):
                    raw = _read_exact(f, size, "sample data")
                    codes = np.frombuffer(raw, dtype="<i2")
                    samples = (codes.astype(np.float32) / np.float32(_PCM16_SCALE)).astype(np.float32)
                elif (audio_format, bits) == (3, 32):
                    raw = _read_exact(f, size, "sample data")
                    samples = np.frombuffer(raw, dtype="<f4").astype(np.float32)
                else:
                    raise DataError(
                        f"{path}: unsupported encoding (format {audio_format}, {bits}-bit);"
                        " need 16-bit PCM or 32-bit IEEE float"
                    )
                return Waveform(sample_rate_hz=int(rate), samples=samples)
            else:
                _read_exact(f, size + (size & 1), f"chunk {chunk_id!r}")


def save_wav(w: Waveform, path: PathLike, encoding: str = "float32") -> None:
    """Write a mono WAV file. ``encoding`` is ``pcm16`` or ``float32``.

    float32 round-trips samples exactly; pcm16 quantizes (error at most
    1/32768 per sample) and clamps out-of-range amplitudes to the extreme
    codes.
    """
    if encoding == "pcm16":
        codes = np.clip(np.rint(w.samples.astype(np.float64) * _PCM16_SCALE), -32768, 32767)
        payload = codes.astype("<i2").tobytes()
        audio_format, bits = 1, 16
    elif encoding == "float32":
        payload = w.samples.astype("<f4").tobytes()
        audio_format, bits = 3, 32
    else:
        raise ValueError(f"encoding must be 'pcm16' or 'float32', got {encoding!r}")

    block_align = bits // 8
    byte_rate = w.sample_rate_hz * block_align
    fmt_body = struct.pack("<HHIIHH", audio_format, 1, w.sample_rate_hz, byte_rate, block_align, bits)
    chunks = b"".join(
        [
            b"fmt ", struct.pack("<I", len(fmt_body)), fmt_body,
            b"data", struct.pack("<I", len(payload)), payload,
        ]
    )
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE")
        f.write(chunks)


def align_pair(
    y: Waveform,
    xhat: Waveform,
    max_len_mismatch_ratio: float = DEFAULT_MAX_LEN_MISMATCH_RATIO,
) -> tuple[Waveform, Waveform]:
    """Trim a noisy/enhanced pair to equal length; never resamples.

    A sample-rate mismatch or a relative length difference beyond
    ``max_len_mismatch_ratio`` is an error rather than something to paper
    over, since silently stretching audio would desynchronize frame weights.
    """
    if y.sample_rate_hz != xhat.sample_rate_hz:
        raise DataError(
            f"sample-rate mismatch: {y.sample_rate_hz} Hz vs {xhat.sample_rate_hz} Hz"
        )
    ny, nx = len(y), len(xhat)
    if ny == nx:
        return y, xhat
    longer = max(ny, nx)
    if abs(ny - nx) / max(longer, 1) > max_len_mismatch_ratio:
        raise DataError(
            f"length mismatch: {ny} vs {nx} samples exceeds ratio {max_len_mismatch_ratio}"
        )
    n = min(ny, nx)
    return (
        Waveform(y.sample_rate_hz, y.samples[:n]),
        Waveform(xhat.sample_rate_hz, xhat.samples[:n]),
    )


def _require_aligned(y: Waveform, xhat: Waveform) -> None:
    if y.sample_rate_hz != xhat.sample_rate_hz or len(y) != len(xhat):
        raise ValueError(
            f"inputs not aligned: {len(y)} samples @ {y.sample_rate_hz} Hz vs"
            f" {len(xhat)} samples @ {xhat.sample_rate_hz} Hz"
        )


def _mix(y: Waveform, xhat: Waveform, w) -> Waveform:
    # float64 mix then one rounding to float32: endpoint weights are exact
    # and the result cannot escape the per-sample [min, max] envelope.
    # The smaller coefficient is re-derived from the larger one (whose
    # complement is exact for w >= 0.5), which makes fusing (y, x, w) and
    # (x, y, 1-w) produce bit-identical coefficient pairs.
    yd = y.samples.astype(np.float64)
    xd = xhat.samples.astype(np.float64)
    w = np.asarray(w, dtype=np.float64)
    wx = 1.0 - w
    wy = np.where(w >= 0.5, w, 1.0 - wx)
    out = wy * yd + wx * xd
    return Waveform(y.sample_rate_hz, out.astype(np.float32))


def fuse_utterance(y: Waveform, xhat: Waveform, s: float) -> Waveform:
    """Blend aligned signals with one scalar weight: s*y + (1-s)*xhat."""
    if not (0.0 <= s <= 1.0):
        raise ValueError(f"fusion weight must lie in [0, 1], got {s}")
    _require_aligned(y, xhat)
    return _mix(y, xhat, float(s))


def expand_frame_weights(
    weights: Sequence[float], hop_samples: int, num_samples: int
) -> np.ndarray:
    """Expand per-frame weights to per-sample weights (piecewise constant).

    Sample i takes weights[i // hop_samples]; samples past the last full
    frame reuse the final frame's weight.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-D sequence")
    if hop_samples <= 0:
        raise ValueError(f"hop_samples must be positive, got {hop_samples}")
    if num_samples <= 0:
        raise ValueError(f"num_samples must be positive, got {num_samples}")
    idx = np.minimum(np.arange(num_samples) // hop_samples, w.size - 1)
    return w[idx]


def fuse_frames(
    y: Waveform, xhat: Waveform, weights: Sequence[float], hop_samples: int
) -> Waveform:
    """Blend aligned signals with a per-frame weight vector."""
    _require_aligned(y, xhat)
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ValueError("weights must be non-empty")
    if np.any(w < 0.0) or np.any(w > 1.0):
        raise ValueError("every frame weight must lie in [0, 1]")
    per_sample = expand_frame_weights(w, hop_samples, len(y))
    return _mix(y, xhat, per_sample)
