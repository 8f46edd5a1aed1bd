"""Request handling and the stdio/http serving loops.

One request is in flight per connection; run several adapter processes for
parallel decoding. Per-request problems are reported in the response's
error field; only a model that fails to load aborts the process.
"""
from __future__ import annotations

import http.server
import itertools
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .recognizers import Decoded
from .wire import (
    Request,
    RequestError,
    decode_inline_audio,
    error_line,
    parse_request,
    read_wav,
    response_line,
    write_posterior,
)


@dataclass
class AdapterConfig:
    """What the adapter serves and where posterior files land."""

    model_id: str
    device: str = "cpu"
    confidence_artifacts: frozenset[str] = frozenset()
    posterior_dir: Path = field(default_factory=lambda: Path("."))

    def __post_init__(self):
        self.posterior_dir = Path(self.posterior_dir)
        unknown = self.confidence_artifacts - {"segments", "token_confidences", "posterior"}
        if unknown:
            raise ValueError(f"unknown confidence artifacts {sorted(unknown)}")


class RequestHandler:
    """Turns one protocol request into one protocol response line."""

    _posterior_counter = itertools.count(1)  # process-wide: filenames never collide

    def __init__(self, recognizer, cfg: AdapterConfig):
        self.recognizer = recognizer
        self.cfg = cfg
        if not self.cfg.confidence_artifacts:
            self.cfg.confidence_artifacts = frozenset(recognizer.artifacts)
        unsupported = self.cfg.confidence_artifacts - recognizer.artifacts
        if unsupported:
            raise ValueError(
                f"model family {recognizer.family!r} cannot produce {sorted(unsupported)}"
            )

    def handle_line(self, line: str) -> str:
        try:
            req = parse_request(line)
        except RequestError as exc:
            return error_line("unknown", exc.code, str(exc))
        try:
            return self._respond(req)
        except RequestError as exc:
            return error_line(req.id, exc.code, str(exc))
        except FileNotFoundError as exc:
            return error_line(req.id, "bad_audio", str(exc))
        except Exception as exc:  # a recognizer bug must not kill the server
            return error_line(req.id, "internal", f"{type(exc).__name__}: {exc}")

    def _respond(self, req: Request) -> str:
        wanted_artifacts = set(req.want) - {"transcript"}
        unsupported = wanted_artifacts - self.cfg.confidence_artifacts
        if unsupported:
            raise RequestError(
                "artifact_unsupported",
                f"this adapter serves {sorted(self.cfg.confidence_artifacts)},"
                f" not {sorted(unsupported)}",
            )

        if "path" in req.audio:
            samples, rate = read_wav(req.audio["path"])
        else:
            samples, rate = decode_inline_audio(req.audio)

        decoded: Decoded = self.recognizer.decode(samples, rate)

        posterior_path = None
        blank_id = None
        class_labels = None
        if "posterior" in req.want and decoded.posterior is not None:
            self.cfg.posterior_dir.mkdir(parents=True, exist_ok=True)
            # several adapter processes may share one posterior directory
            # (one per harness worker), so names carry the pid
            posterior_path = str(
                self.cfg.posterior_dir
                / f"posterior_{os.getpid()}_{next(self._posterior_counter):05d}.oapm"
            )
            write_posterior(posterior_path, decoded.posterior)
            blank_id = decoded.blank_id
            class_labels = decoded.class_labels

        segments = decoded.segments if "segments" in req.want else None
        token_confs = decoded.token_confidences if "token_confidences" in req.want else None
        if segments is None and token_confs is None and posterior_path is None:
            # the consumer requires at least one artifact; fall back to the
            # cheapest one this family produces
            if decoded.segments is not None:
                segments = decoded.segments
            elif decoded.token_confidences is not None:
                token_confs = decoded.token_confidences
        return response_line(
            req.id,
            transcript=decoded.transcript,
            segments=segments,
            token_confidences=token_confs,
            posterior_path=posterior_path,
            class_labels=class_labels,
            blank_id=blank_id,
        )


def serve_stdio(handler: RequestHandler, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(handler.handle_line(line) + "\n")
        stdout.flush()


def serve_http(handler: RequestHandler, host: str, port: int):
    class _HttpHandler(http.server.BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            body = self.rfile.read(length).decode("utf-8")
            payload = handler.handle_line(body).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    server = http.server.HTTPServer((host, port), _HttpHandler)
    return server
