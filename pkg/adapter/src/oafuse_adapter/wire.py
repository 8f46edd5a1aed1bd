"""The adapter's side of the wire protocol and posterior file format.

Deliberately self-contained: the evaluation toolkit and this adapter share
only the documented formats, so each end implements them independently.

Messages are single-line JSON. Responses always carry every field with
explicit nulls and are serialized canonically (sorted keys, compact
separators). Posterior files: magic ``OAPM``, u32 version (=1), u32 frames,
u32 classes, little-endian, then row-major float32 probabilities.
"""
from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass

import numpy as np

POSTERIOR_MAGIC = b"OAPM"
POSTERIOR_VERSION = 1

WANTABLE = ("transcript", "segments", "token_confidences", "posterior")


class RequestError(Exception):
    """Bad request; carries the protocol error code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class Request:
    id: str
    audio: dict
    want: tuple[str, ...]


def parse_request(line: str) -> Request:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RequestError("bad_request", f"request is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise RequestError("bad_request", "request must be a JSON object")
    req_id = obj.get("id")
    if not isinstance(req_id, str) or not req_id:
        raise RequestError("bad_request", "request id must be a non-empty string")
    if obj.get("op") != "transcribe":
        raise RequestError("bad_request", f"unsupported op {obj.get('op')!r}")
    audio = obj.get("audio")
    if not isinstance(audio, dict) or not (
        set(audio) == {"path"} or set(audio) == {"pcm_f32le_b64", "sample_rate"}
    ):
        raise RequestError("bad_request", "audio must carry a path or inline pcm with a rate")
    want = obj.get("want")
    if not isinstance(want, list) or any(w not in WANTABLE for w in want):
        raise RequestError("bad_request", f"want must be a subset of {WANTABLE}")
    return Request(id=req_id, audio=audio, want=tuple(want))


def response_line(
    req_id: str,
    transcript: str = "",
    segments=None,
    token_confidences=None,
    posterior_path=None,
    class_labels=None,
    blank_id=None,
    error=None,
) -> str:
    obj = {
        "id": req_id,
        "transcript": transcript,
        "segments": segments,
        "token_confidences": token_confidences,
        "posterior_path": posterior_path,
        "class_labels": class_labels,
        "blank_id": blank_id,
        "error": error,
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def error_line(req_id: str, code: str, message: str) -> str:
    return response_line(req_id, error={"code": code, "message": message})


def decode_inline_audio(audio: dict) -> tuple[np.ndarray, int]:
    try:
        raw = base64.b64decode(audio["pcm_f32le_b64"].encode("ascii"), validate=True)
    except Exception as exc:
        raise RequestError("bad_request", f"bad base64 audio: {exc}") from exc
    if len(raw) % 4:
        raise RequestError("bad_request", "pcm payload is not a whole number of float32 samples")
    rate = audio["sample_rate"]
    if not isinstance(rate, int) or isinstance(rate, bool) or rate <= 0:
        raise RequestError("bad_request", "sample_rate must be a positive integer")
    return np.frombuffer(raw, dtype="<f4").astype(np.float32), rate


def read_wav(path: str) -> tuple[np.ndarray, int]:
    """Minimal mono WAV reader (16-bit PCM or 32-bit float)."""
    with open(path, "rb") as f:
        head = f.read(12)
        if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
            raise RequestError("bad_audio", f"{path}: not a RIFF/WAVE file")
        fmt = None
        while True:
            chunk = f.read(8)
            if len(chunk) < 8:
                raise RequestError("bad_audio", f"{path}: no data chunk")
            cid, size = struct.unpack("<4sI", chunk)
            body_needed = cid in (b"fmt ", b"data")
            if cid == b"fmt ":
                body = f.read(size)
                code, channels, rate, _, _, bits = struct.unpack("<HHIIHH", body[:16])
                fmt = (code, channels, rate, bits)
            elif cid == b"data":
                if fmt is None:
                    raise RequestError("bad_audio", f"{path}: data chunk precedes fmt")
                code, channels, rate, bits = fmt
                if channels != 1:
                    raise RequestError("bad_audio", f"{path}: only mono audio is supported")
                raw = f.read(size)
                if len(raw) < size:
                    raise RequestError("bad_audio", f"{path}: truncated data chunk")
                if (code, bits) == (1, 16):
                    return (
                        np.frombuffer(raw, dtype="<i2").astype(np.float32) / np.float32(32768.0),
                        rate,
                    )
                if (code, bits) == (3, 32):
                    return np.frombuffer(raw, dtype="<f4").astype(np.float32), rate
                raise RequestError("bad_audio", f"{path}: unsupported encoding")
            else:
                f.read(size + (size & 1))


def write_posterior(path, probs: np.ndarray) -> None:
    arr = np.asarray(probs, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"posterior must be 2-D, got shape {arr.shape}")
    t, v = arr.shape
    with open(path, "wb") as f:
        f.write(POSTERIOR_MAGIC)
        f.write(struct.pack("<III", POSTERIOR_VERSION, t, v))
        f.write(arr.tobytes(order="C"))
