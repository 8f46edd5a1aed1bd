"""The ASR boundary: output carrier, confidence-mode dispatch, the
deterministic tone-word mock recognizer, and clients for recognizers served
over the wire protocol (subprocess stdio or HTTP).
"""
from __future__ import annotations

import itertools
import os
import select
import shlex
import subprocess
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import Waveform
from .confidence import (
    DEFAULT_TSALLIS_Q,
    PosteriorMatrix,
    SegmentStat,
    _tsallis_conf_rows,
    ctc_token_confidences,
    geometric_mean_confidence,
    segment_confidence,
)
from .errors import BackendError, ProtocolError
from .protocol import (
    TranscribeRequest,
    WANTABLE,
    encode_pcm_b64,
    parse_response,
    read_posterior_file,
    serialize_request,
)
from .testbed import ToneConfig, analyze_slots

DEFAULT_TIMEOUT_MS = 60_000

DEFAULT_WANT = ("transcript", "segments", "token_confidences", "posterior")


@dataclass(frozen=True)
class AsrOutput:
    """Transcript plus whatever confidence artifacts the recognizer supplies."""

    transcript: str
    segments: tuple[SegmentStat, ...] | None = None
    token_confidences: tuple[float, ...] | None = None
    posterior: PosteriorMatrix | None = None
    class_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.segments is None and self.token_confidences is None and self.posterior is None:
            raise ValueError(
                "AsrOutput needs at least one of segments, token_confidences, posterior"
            )
        if self.token_confidences is not None:
            for c in self.token_confidences:
                if not (0.0 <= c <= 1.0):
                    raise ValueError(f"token confidence {c} outside [0, 1]")


@dataclass(frozen=True)
class ConfidenceMode:
    """How to reduce an AsrOutput to one utterance confidence.

    ``segment``: token-weighted average of exp(segment avg logprob).
    ``token``: geometric mean of backend-reported token confidences.
    ``ctc``: entropy confidences from the frame posterior, min-pooled over
    greedy spans, then geometric mean; ``q`` is the entropy order.
    """

    kind: str = "token"
    q: float = DEFAULT_TSALLIS_Q

    def __post_init__(self):
        if self.kind not in ("segment", "token", "ctc"):
            raise ValueError(f"conf mode must be segment, token, or ctc, got {self.kind!r}")
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"entropy order q must lie in (0, 1), got {self.q}")


def utterance_confidence(output: AsrOutput, mode: ConfidenceMode) -> float:
    """Dispatch to the confidence computation selected by ``mode``."""
    if mode.kind == "segment":
        if output.segments is None:
            raise ValueError("confidence mode 'segment' needs segments, but the backend sent none")
        return segment_confidence(output.segments)
    if mode.kind == "token":
        if output.token_confidences is None:
            raise ValueError(
                "confidence mode 'token' needs token_confidences, but the backend sent none"
            )
        return geometric_mean_confidence(output.token_confidences)
    if output.posterior is None:
        raise ValueError("confidence mode 'ctc' needs a frame posterior, but the backend sent none")
    return geometric_mean_confidence(ctc_token_confidences(output.posterior, mode.q))


def tone_asr_transcribe(w: Waveform, cfg: ToneConfig) -> AsrOutput:
    """Deterministic mock recognizer over the tone-word world.

    Each slot's class posterior comes from single-bin spectral powers at the
    vocabulary frequencies plus the blank noise floor; the transcript is the
    per-slot argmax with blank slots skipped, and token confidences are the
    entropy confidences of the non-blank slot posteriors. The emitted frame
    posterior has ``frames_per_slot`` rows per slot.
    """
    if w.sample_rate_hz != cfg.sample_rate_hz:
        raise ValueError(
            f"waveform rate {w.sample_rate_hz} Hz does not match config rate {cfg.sample_rate_hz} Hz"
        )
    slot_posteriors, frame_posteriors = analyze_slots(w.samples, cfg)
    if slot_posteriors.shape[0] == 0:
        return AsrOutput(
            transcript="",
            token_confidences=(),
            posterior=None,
            class_labels=tuple(cfg.class_labels),
        )

    slot_ids = np.argmax(slot_posteriors, axis=1)
    voiced = slot_ids != cfg.blank_id
    transcript = " ".join(cfg.vocab[int(i)] for i in slot_ids[voiced])
    slot_confs = _tsallis_conf_rows(slot_posteriors, DEFAULT_TSALLIS_Q)
    return AsrOutput(
        transcript=transcript,
        token_confidences=tuple(float(c) for c in slot_confs[voiced]),
        posterior=PosteriorMatrix(frame_posteriors, blank_id=cfg.blank_id),
        class_labels=tuple(cfg.class_labels),
    )


@dataclass(frozen=True)
class BackendHandle:
    """Address of an external recognizer process or service."""

    transport: str  # "subprocess-stdio" | "http"
    endpoint: str
    timeout_ms: int = DEFAULT_TIMEOUT_MS

    def __post_init__(self):
        if self.transport not in ("subprocess-stdio", "http"):
            raise ValueError(f"transport must be subprocess-stdio or http, got {self.transport!r}")
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be positive, got {self.timeout_ms}")


class MockBackend:
    """In-process tone-word recognizer; pure and connection-free."""

    def __init__(self, cfg: ToneConfig | None = None):
        self.cfg = cfg if cfg is not None else ToneConfig()
        self.backend_id = "mock"

    def transcribe(self, w: Waveform, want=DEFAULT_WANT) -> AsrOutput:
        return tone_asr_transcribe(w, self.cfg)

    def close(self) -> None:
        pass


def _response_to_output(resp) -> AsrOutput:
    if resp.error is not None:
        raise BackendError(f"backend error {resp.error['code']}: {resp.error['message']}")
    segments = None
    if resp.segments is not None:
        try:
            segments = tuple(
                SegmentStat(float(s["avg_logprob"]), int(s["num_tokens"])) for s in resp.segments
            )
        except ValueError as exc:
            raise ProtocolError(f"bad segment statistics: {exc}") from exc
    posterior = None
    if resp.posterior_path is not None:
        probs = read_posterior_file(resp.posterior_path)
        try:
            posterior = PosteriorMatrix(probs, blank_id=resp.blank_id)
        except ValueError as exc:
            raise ProtocolError(f"corrupt posterior {resp.posterior_path}: {exc}") from exc
    token_confs = None if resp.token_confidences is None else tuple(float(c) for c in resp.token_confidences)
    labels = None if resp.class_labels is None else tuple(resp.class_labels)
    try:
        return AsrOutput(
            transcript=resp.transcript,
            segments=segments,
            token_confidences=token_confs,
            posterior=posterior,
            class_labels=labels,
        )
    except ValueError as exc:
        raise ProtocolError(str(exc)) from exc


def _request_for(req_id: str, w: Waveform, want) -> TranscribeRequest:
    for item in want:
        if item not in WANTABLE:
            raise ValueError(f"unknown artifact {item!r} in want")
    audio = {"pcm_f32le_b64": encode_pcm_b64(w.samples), "sample_rate": w.sample_rate_hz}
    return TranscribeRequest(id=req_id, audio=audio, want=tuple(want))


class SubprocessBackend:
    """Line-delimited JSON over a child process's stdio.

    One request in flight at a time; spawn one backend per worker for
    parallelism.
    """

    def __init__(self, handle: BackendHandle):
        if handle.transport != "subprocess-stdio":
            raise ValueError(f"expected subprocess-stdio handle, got {handle.transport}")
        self.handle = handle
        self.backend_id = f"cmd:{handle.endpoint}"
        self._ids = itertools.count(1)
        self._proc: subprocess.Popen | None = None
        self._buf = bytearray()

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    shlex.split(self.handle.endpoint),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                )
            except OSError as exc:
                raise BackendError(f"cannot start backend {self.handle.endpoint!r}: {exc}") from exc
            self._buf = bytearray()
        return self._proc

    def _read_line(self, proc: subprocess.Popen) -> str:
        import time

        deadline = time.monotonic() + self.handle.timeout_ms / 1000.0
        fd = proc.stdout.fileno()
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BackendError(f"backend timed out after {self.handle.timeout_ms} ms")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise BackendError(f"backend timed out after {self.handle.timeout_ms} ms")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise BackendError("backend closed its output stream")
            self._buf.extend(chunk)
        line, _, rest = bytes(self._buf).partition(b"\n")
        self._buf = bytearray(rest)
        return line.decode("utf-8")

    def transcribe(self, w: Waveform, want=DEFAULT_WANT) -> AsrOutput:
        proc = self._ensure_proc()
        req = _request_for(f"r{next(self._ids)}", w, want)
        try:
            proc.stdin.write(serialize_request(req).encode("utf-8") + b"\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"backend pipe closed: {exc}") from exc
        resp = parse_response(self._read_line(proc))
        if resp.id != req.id:
            raise ProtocolError(f"response id {resp.id!r} does not match request id {req.id!r}")
        return _response_to_output(resp)

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            self._proc = None


class HttpBackend:
    """One wire-protocol message per HTTP POST."""

    def __init__(self, handle: BackendHandle):
        if handle.transport != "http":
            raise ValueError(f"expected http handle, got {handle.transport}")
        self.handle = handle
        self.backend_id = handle.endpoint
        self._ids = itertools.count(1)

    def transcribe(self, w: Waveform, want=DEFAULT_WANT) -> AsrOutput:
        req = _request_for(f"r{next(self._ids)}", w, want)
        body = serialize_request(req).encode("utf-8")
        http_req = urllib.request.Request(
            self.handle.endpoint, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(http_req, timeout=self.handle.timeout_ms / 1000.0) as r:
                payload = r.read().decode("utf-8")
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise BackendError(f"http backend failed: {exc}") from exc
        resp = parse_response(payload)
        if resp.id != req.id:
            raise ProtocolError(f"response id {resp.id!r} does not match request id {req.id!r}")
        return _response_to_output(resp)

    def close(self) -> None:
        pass


def open_backend(spec: str, timeout_ms: int = DEFAULT_TIMEOUT_MS):
    """Build a backend from a CLI-style spec.

    ``mock`` or ``mock:<tone-config.json>`` for the in-process recognizer,
    ``cmd:<command line>`` for a subprocess server, or an ``http(s)://`` URL.
    """
    if spec == "mock":
        return MockBackend()
    if spec.startswith("mock:"):
        return MockBackend(ToneConfig.from_file(Path(spec[len("mock:"):])))
    if spec.startswith("cmd:"):
        cmdline = spec[len("cmd:"):]
        if not cmdline.strip():
            raise ValueError("empty backend command line")
        return SubprocessBackend(BackendHandle("subprocess-stdio", cmdline, timeout_ms))
    if spec.startswith(("http://", "https://")):
        return HttpBackend(BackendHandle("http", spec, timeout_ms))
    raise ValueError(f"backend spec must be mock[:cfg], cmd:..., or an http(s) URL, got {spec!r}")


def transcribe(handle: BackendHandle, w: Waveform, want=DEFAULT_WANT) -> AsrOutput:
    """One-shot transcription through a transient connection."""
    backend_cls = SubprocessBackend if handle.transport == "subprocess-stdio" else HttpBackend
    backend = backend_cls(handle)
    try:
        return backend.transcribe(w, want)
    finally:
        backend.close()
