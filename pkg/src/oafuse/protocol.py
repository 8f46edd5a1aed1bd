"""Wire protocol for external recognizers, plus the binary posterior format.

Messages are single-line JSON objects (newline-delimited over subprocess
stdio, or one HTTP POST body each). Serialization is canonical — sorted
keys, compact separators, explicit nulls — so any valid message re-encodes
byte-for-byte.

Frame posteriors travel out-of-band as little-endian binary files:
magic ``OAPM``, u32 version (=1), u32 frame count, u32 class count, then
frames*classes float32 probabilities, row-major.
"""
from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ProtocolError

PathLike = Union[str, Path]

POSTERIOR_MAGIC = b"OAPM"
POSTERIOR_VERSION = 1

WANTABLE = ("transcript", "segments", "token_confidences", "posterior")
ARTIFACT_FIELDS = ("segments", "token_confidences", "posterior_path")

REQUEST_FIELDS = ("id", "op", "audio", "want")
RESPONSE_FIELDS = (
    "id",
    "transcript",
    "segments",
    "token_confidences",
    "posterior_path",
    "class_labels",
    "blank_id",
    "error",
)


@dataclass(frozen=True)
class TranscribeRequest:
    id: str
    audio: dict
    want: tuple[str, ...]


@dataclass(frozen=True)
class TranscribeResponse:
    id: str
    transcript: str = ""
    segments: list[dict] | None = None
    token_confidences: list[float] | None = None
    posterior_path: str | None = None
    class_labels: list[str] | None = None
    blank_id: int | None = None
    error: dict | None = None


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def encode_pcm_b64(samples: np.ndarray) -> str:
    """float32 little-endian samples as base64 text."""
    return base64.b64encode(np.asarray(samples, dtype="<f4").tobytes()).decode("ascii")


def decode_pcm_b64(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload.encode("ascii"), validate=True)
    except Exception as exc:
        raise ProtocolError(f"bad base64 audio payload: {exc}") from exc
    if len(raw) % 4 != 0:
        raise ProtocolError(f"pcm payload length {len(raw)} is not a multiple of 4")
    return np.frombuffer(raw, dtype="<f4").astype(np.float32)


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise ProtocolError(msg)


def validate_request_obj(obj) -> None:
    """Raise ProtocolError unless ``obj`` is a schema-valid request dict."""
    _expect(isinstance(obj, dict), "request must be a JSON object")
    unknown = set(obj) - set(REQUEST_FIELDS)
    _expect(not unknown, f"request has unknown fields {sorted(unknown)}")
    for field in REQUEST_FIELDS:
        _expect(field in obj, f"request missing field '{field}'")
    _expect(isinstance(obj["id"], str) and obj["id"], "request id must be a non-empty string")
    _expect(obj["op"] == "transcribe", f"unsupported op {obj['op']!r}")
    audio = obj["audio"]
    _expect(isinstance(audio, dict), "request audio must be an object")
    if set(audio) == {"path"}:
        _expect(isinstance(audio["path"], str) and audio["path"], "audio path must be a non-empty string")
    elif set(audio) == {"pcm_f32le_b64", "sample_rate"}:
        _expect(isinstance(audio["pcm_f32le_b64"], str), "pcm payload must be a string")
        _expect(
            isinstance(audio["sample_rate"], int) and not isinstance(audio["sample_rate"], bool)
            and audio["sample_rate"] > 0,
            "sample_rate must be a positive integer",
        )
    else:
        raise ProtocolError(
            "audio must be either {'path'} or {'pcm_f32le_b64', 'sample_rate'},"
            f" got keys {sorted(audio)}"
        )
    want = obj["want"]
    _expect(isinstance(want, list), "want must be an array")
    for item in want:
        _expect(item in WANTABLE, f"unknown artifact {item!r} in want")


def validate_response_obj(obj) -> None:
    """Raise ProtocolError unless ``obj`` is a schema-valid response dict."""
    _expect(isinstance(obj, dict), "response must be a JSON object")
    unknown = set(obj) - set(RESPONSE_FIELDS)
    _expect(not unknown, f"response has unknown fields {sorted(unknown)}")
    for field in RESPONSE_FIELDS:
        _expect(field in obj, f"response missing field '{field}'")
    _expect(isinstance(obj["id"], str) and obj["id"], "response id must be a non-empty string")

    err = obj["error"]
    if err is not None:
        _expect(isinstance(err, dict), "error must be null or an object")
        _expect(set(err) == {"code", "message"}, "error needs exactly 'code' and 'message'")
        _expect(isinstance(err["code"], str) and err["code"], "error code must be a non-empty string")
        _expect(isinstance(err["message"], str), "error message must be a string")
        return

    _expect(isinstance(obj["transcript"], str), "transcript must be a string")
    _expect(
        any(obj[f] is not None for f in ARTIFACT_FIELDS),
        "response carries no confidence artifact (segments, token_confidences, posterior_path all null)",
    )

    segments = obj["segments"]
    if segments is not None:
        _expect(isinstance(segments, list), "segments must be null or an array")
        for seg in segments:
            _expect(isinstance(seg, dict), "segment entries must be objects")
            _expect(set(seg) == {"avg_logprob", "num_tokens"}, "segment needs exactly avg_logprob and num_tokens")
            _expect(
                isinstance(seg["avg_logprob"], (int, float)) and not isinstance(seg["avg_logprob"], bool),
                "avg_logprob must be a number",
            )
            _expect(
                isinstance(seg["num_tokens"], int) and not isinstance(seg["num_tokens"], bool)
                and seg["num_tokens"] >= 1,
                "num_tokens must be a positive integer",
            )

    confs = obj["token_confidences"]
    if confs is not None:
        _expect(isinstance(confs, list), "token_confidences must be null or an array")
        for c in confs:
            _expect(
                isinstance(c, (int, float)) and not isinstance(c, bool) and 0.0 <= c <= 1.0,
                f"token confidence {c!r} outside [0, 1]",
            )

    _expect(
        obj["posterior_path"] is None or (isinstance(obj["posterior_path"], str) and obj["posterior_path"]),
        "posterior_path must be null or a non-empty string",
    )
    labels = obj["class_labels"]
    if labels is not None:
        _expect(isinstance(labels, list) and all(isinstance(x, str) for x in labels),
                "class_labels must be null or an array of strings")
    blank = obj["blank_id"]
    _expect(
        blank is None or (isinstance(blank, int) and not isinstance(blank, bool) and blank >= 0),
        "blank_id must be null or a non-negative integer",
    )
    if obj["posterior_path"] is not None:
        _expect(blank is not None, "a posterior reference requires blank_id")


def parse_request(line: str) -> TranscribeRequest:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"request is not valid JSON: {exc}") from exc
    validate_request_obj(obj)
    return TranscribeRequest(id=obj["id"], audio=dict(obj["audio"]), want=tuple(obj["want"]))


def serialize_request(req: TranscribeRequest) -> str:
    return canonical_json(
        {"id": req.id, "op": "transcribe", "audio": req.audio, "want": list(req.want)}
    )


def parse_response(line: str) -> TranscribeResponse:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"response is not valid JSON: {exc}") from exc
    validate_response_obj(obj)
    return TranscribeResponse(
        id=obj["id"],
        transcript=obj["transcript"] if obj["error"] is None else "",
        segments=obj["segments"],
        token_confidences=obj["token_confidences"],
        posterior_path=obj["posterior_path"],
        class_labels=obj["class_labels"],
        blank_id=obj["blank_id"],
        error=obj["error"],
    )


def serialize_response(resp: TranscribeResponse) -> str:
    return canonical_json(
        {
            "id": resp.id,
            "transcript": resp.transcript,
            "segments": resp.segments,
            "token_confidences": resp.token_confidences,
            "posterior_path": resp.posterior_path,
            "class_labels": resp.class_labels,
            "blank_id": resp.blank_id,
            "error": resp.error,
        }
    )


def write_posterior_file(path: PathLike, probs: np.ndarray) -> None:
    """Write a frames-by-classes probability matrix in the binary format."""
    arr = np.asarray(probs, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"posterior must be 2-D, got shape {arr.shape}")
    t, v = arr.shape
    with open(path, "wb") as f:
        f.write(POSTERIOR_MAGIC)
        f.write(struct.pack("<III", POSTERIOR_VERSION, t, v))
        f.write(arr.tobytes(order="C"))


def read_posterior_file(path: PathLike) -> np.ndarray:
    """Read a posterior file back as a float64 frames-by-classes array.

    Format violations raise ProtocolError('corrupt posterior ...').
    """
    with open(path, "rb") as f:
        head = f.read(16)
        if len(head) < 16:
            raise ProtocolError(f"corrupt posterior {path}: header truncated")
        if head[:4] != POSTERIOR_MAGIC:
            raise ProtocolError(f"corrupt posterior {path}: bad magic bytes {head[:4]!r}")
        version, t, v = struct.unpack("<III", head[4:16])
        if version != POSTERIOR_VERSION:
            raise ProtocolError(f"corrupt posterior {path}: unsupported version {version}")
        payload = f.read(4 * t * v + 1)
    if len(payload) != 4 * t * v:
        raise ProtocolError(
            f"corrupt posterior {path}: expected {4 * t * v} payload bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(t, v)
