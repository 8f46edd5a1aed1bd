"""Command line entry point: load a model, then serve the wire protocol."""
from __future__ import annotations

import argparse
import sys

from .recognizers import build_recognizer
from .server import AdapterConfig, RequestHandler, serve_http, serve_stdio


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="oafuse-adapter",
        description="Serve a pretrained recognizer over the oafuse wire protocol.",
    )
    ap.add_argument("--model", required=True,
                    help="stub-seq2seq, stub-ctc, whisper:<id>, or wav2vec2:<id>")
    ap.add_argument("--device", default="cpu")
    ap.add_argument("--transport", default="stdio", choices=("stdio", "http"))
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8077)
    ap.add_argument("--posterior-dir", default=".",
                    help="directory for exported posterior files")
    ap.add_argument("--artifacts", default=None,
                    help="comma-separated artifact override (default: all the model family supports)")
    args = ap.parse_args(argv)

    try:
        recognizer = build_recognizer(args.model, args.device)
        artifacts = (
            frozenset(a.strip() for a in args.artifacts.split(",") if a.strip())
            if args.artifacts else frozenset()
        )
        handler = RequestHandler(
            recognizer,
            AdapterConfig(
                model_id=args.model,
                device=args.device,
                confidence_artifacts=artifacts,
                posterior_dir=args.posterior_dir,
            ),
        )
    except Exception as exc:
        print(f"oafuse-adapter: model startup failed: {exc}", file=sys.stderr)
        return 1

    if args.transport == "stdio":
        serve_stdio(handler)
        return 0
    server = serve_http(handler, args.host, args.port)
    print(f"oafuse-adapter: serving {args.model} on http://{args.host}:{server.server_port}",
          file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
