"""Command-line interface.

Subcommands: ``fuse`` (one pair + strategy -> WAV), ``transcribe`` (one WAV
-> JSON), ``eval`` (manifest -> WER report), ``analyze`` (manifest ->
calibration grouping report), ``synth`` (generate a synthetic corpus), and
``frame-eval`` (utterance- vs frame-level fusion comparison).

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
"""
from __future__ import annotations

import argparse
import functools
import json
import sys

from .backend import ConfidenceMode, open_backend
from .errors import BackendError, DataError
from .harness import (
    STRATEGIES,
    UtteranceContext,
    _want_for,
    evaluate,
    fuse_for_strategy,
    group_analysis,
    synth_corpus,
)
from .manifest import ManifestEntry, load_manifest
from .protocol import write_posterior_file
from .report import render_report
from .weights import StrategyConfig


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", default="mock",
                   help="mock[:tone-config.json], cmd:<command line>, or an http(s) URL")
    p.add_argument("--conf-mode", default="token", choices=("segment", "token", "ctc"))
    p.add_argument("--tsallis-q", type=float, default=0.33,
                   help="entropy order for posterior-based confidences")
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", default="tsv", choices=("tsv", "json"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--normalize", default="basic", choices=("basic", "none"))
    p.add_argument("--timeout-ms", type=int, default=60_000)
    p.add_argument("--snr-min-db", type=float, default=0.0)
    p.add_argument("--snr-max-db", type=float, default=20.0)
    p.add_argument("--snr-clip", default=None, metavar="LO,HI",
                   help="clip range for the snr_oa_clip strategy (default 0.6,1.0)")


def _strategy_cfg(args) -> StrategyConfig:
    clip = None
    if args.snr_clip is not None:
        parts = args.snr_clip.split(",")
        if len(parts) != 2:
            raise DataError(f"--snr-clip expects LO,HI, got {args.snr_clip!r}")
        clip = (float(parts[0]), float(parts[1]))
    return StrategyConfig(snr_min_db=args.snr_min_db, snr_max_db=args.snr_max_db, snr_clip=clip)


def _mode(args) -> ConfidenceMode:
    return ConfidenceMode(kind=args.conf_mode, q=args.tsallis_q)


def _backend_factory(args):
    return functools.partial(open_backend, args.backend, timeout_ms=args.timeout_ms)


def _parse_strategies(parser, value: str) -> list[str]:
    names = [s.strip() for s in value.split(",") if s.strip()]
    unknown = [s for s in names if s not in STRATEGIES]
    if unknown:
        parser.error(f"unknown strategies {unknown}; choose from {', '.join(STRATEGIES)}")
    return names


def _write_output(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)


def _warn_failures(metadata: dict, total: int) -> None:
    failures = int(metadata.get("failures", "0"))
    if failures and failures == total:
        raise BackendError(f"all {failures} utterances failed")
    if failures:
        print(f"warning: {failures} utterances failed and were excluded", file=sys.stderr)


def _cmd_fuse(parser, args) -> int:
    entry = ManifestEntry(
        id="cli",
        noisy_path=args.noisy,
        enhanced_path=args.enhanced,
        ref_text=args.ref_text,
        snr_db=args.snr_db,
        dnsmos_bak=args.dnsmos_bak,
        dnsmos_sig=args.dnsmos_sig,
        classifier_posteriors=(
            tuple(float(p) for p in args.classifier_posteriors.split(","))
            if args.classifier_posteriors else None
        ),
    )
    backend = _backend_factory(args)()
    try:
        ctx = UtteranceContext(entry, backend, _mode(args), args.eps, args.normalize,
                               _want_for(_mode(args), (args.strategy,)))
        s, w, fused = fuse_for_strategy(ctx, args.strategy, _strategy_cfg(args))
    finally:
        backend.close()
    from .audio import save_wav

    save_wav(fused, args.out, args.encoding)
    summary = {"strategy": args.strategy, "s_prime": s, "out": args.out}
    if w is not None:
        summary["frame_weights"] = [round(float(x), 6) for x in w]
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_transcribe(parser, args) -> int:
    from .audio import load_wav

    backend = _backend_factory(args)()
    try:
        output = backend.transcribe(load_wav(args.audio))
    finally:
        backend.close()
    posterior_path = None
    if args.posterior_out and output.posterior is not None:
        write_posterior_file(args.posterior_out, output.posterior.probs)
        posterior_path = args.posterior_out
    obj = {
        "transcript": output.transcript,
        "segments": (
            None if output.segments is None
            else [{"avg_logprob": s.avg_logprob, "num_tokens": s.num_tokens} for s in output.segments]
        ),
        "token_confidences": (
            None if output.token_confidences is None else list(output.token_confidences)
        ),
        "posterior_path": posterior_path,
        "class_labels": None if output.class_labels is None else list(output.class_labels),
        "blank_id": None if output.posterior is None else output.posterior.blank_id,
    }
    print(json.dumps(obj, sort_keys=True))
    return 0


def _cmd_eval(parser, args, strategies=None) -> int:
    entries = load_manifest(args.manifest)
    names = strategies if strategies is not None else _parse_strategies(parser, args.strategies)
    report = evaluate(
        entries,
        names,
        _backend_factory(args),
        mode=_mode(args),
        eps=args.eps,
        workers=args.workers,
        normalize=args.normalize,
        strategy_cfg=_strategy_cfg(args),
        seed=args.seed,
    )
    _warn_failures(report.metadata, len(entries))
    _write_output(render_report(report, args.format), args.out)
    return 0


def _cmd_analyze(parser, args) -> int:
    entries = load_manifest(args.manifest)
    analysis = group_analysis(
        entries,
        _backend_factory(args),
        mode=_mode(args),
        eps=args.eps,
        workers=args.workers,
        normalize=args.normalize,
    )
    _warn_failures(analysis.metadata, len(entries))
    _write_output(render_report(analysis, args.format), args.out)
    return 0


def _cmd_synth(parser, args) -> int:
    snr_grid = [float(s) for s in args.snr_grid.split(",") if s.strip()]
    manifest_path = synth_corpus(
        n_utts=args.n_utts,
        words_per_utt=args.words_per_utt,
        vocab_size=args.vocab_size,
        snr_grid=snr_grid,
        residual_noise=args.residual_noise,
        artifact_drop_prob=args.artifact_drop_prob,
        seed=args.seed if args.seed is not None else 0,
        out_dir=args.out_dir,
    )
    print(manifest_path)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="oafuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse",
                       help="fuse one noisy/enhanced pair with a strategy")
    p.add_argument("--noisy", required=True)
    p.add_argument("--enhanced", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", required=True, choices=STRATEGIES)
    p.add_argument("--encoding", default="float32", choices=("pcm16", "float32"))
    p.add_argument("--ref-text", default=None)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--dnsmos-bak", type=float, default=None)
    p.add_argument("--dnsmos-sig", type=float, default=None)
    p.add_argument("--classifier-posteriors", default=None, metavar="P0,P1[,P2]")
    _add_shared_flags(p)

    p = sub.add_parser("transcribe", help="decode one WAV to JSON")
    p.add_argument("--audio", required=True)
    p.add_argument("--posterior-out", default=None)
    _add_shared_flags(p)

    p = sub.add_parser("eval",
                       help="evaluate strategies over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--strategies", required=True, metavar="NAME[,NAME...]")
    p.add_argument("--out", default="-")
    _add_shared_flags(p)

    p = sub.add_parser("analyze",
                       help="confidence-calibration grouping analysis")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="-")
    _add_shared_flags(p)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-utts", type=int, default=200)
    p.add_argument("--words-per-utt", type=int, default=6)
    p.add_argument("--vocab-size", type=int, default=8)
    p.add_argument("--snr-grid", default="-5,0,5,10",
                   help="comma-separated dB values; use --snr-grid=-5,... for negative grids")
    p.add_argument("--residual-noise", type=float, default=0.15)
    p.add_argument("--artifact-drop-prob", type=float, default=0.15)
    _add_shared_flags(p)

    p = sub.add_parser("frame-eval",
                       help="utterance- vs frame-level fusion comparison")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="-")
    _add_shared_flags(p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fuse":
            return _cmd_fuse(parser, args)
        if args.command == "transcribe":
            return _cmd_transcribe(parser, args)
        if args.command == "eval":
            return _cmd_eval(parser, args)
        if args.command == "analyze":
            return _cmd_analyze(parser, args)
        if args.command == "synth":
            return _cmd_synth(parser, args)
        if args.command == "frame-eval":
            return _cmd_eval(parser, args, strategies=["conf_oa", "frame_conf_oa"])
        parser.error(f"unknown command {args.command!r}")
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
