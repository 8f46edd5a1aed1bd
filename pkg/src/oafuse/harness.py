"""Manifest-driven evaluation: run fusion strategies over a corpus, decode
through a backend, and aggregate WER tables, plus the confidence-calibration
grouping analysis and synthetic corpus generation.

Utterances are independent work items; each worker thread owns a private
backend connection, and the final report is a deterministic merge sorted by
(method, utterance id), so the output does not depend on the worker count.
"""
from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .audio import Waveform, align_pair, fuse_frames, fuse_utterance, load_wav, save_wav
from .backend import AsrOutput, ConfidenceMode, utterance_confidence
from .confidence import frame_confidences
from .errors import BackendError, DataError
from .manifest import ManifestEntry
from .metrics import EditStats, corpus_wer, edit_distance, normalize_text, wer
from .report import (
    GROUPS,
    SUBGROUPS,
    EvalReport,
    GroupAnalysis,
    GroupCell,
    MethodRow,
    UttResult,
)
from .testbed import make_config, simulate_enhancement, synth_utterance
from .weights import (
    Choice,
    StrategyConfig,
    frame_weights,
    switch_decision,
    weight_from_classifier2,
    weight_from_classifier3,
    weight_from_conf,
    weight_from_dnsmos,
    weight_from_snr,
    weight_from_wer,
)

BASELINE_METHODS = ("noisy", "enhanced")

STRATEGIES = (
    "wer_oracle_oa",
    "conf_oa",
    "conf_switch",
    "snr_oa",
    "snr_oa_clip",
    "dnsmos_oa",
    "classifier2_oa",
    "classifier3_oa",
    "frame_conf_oa",
)

_REQUIRED_FIELDS = {
    "snr_oa": ("snr_db",),
    "snr_oa_clip": ("snr_db",),
    "dnsmos_oa": ("dnsmos_bak", "dnsmos_sig"),
    "classifier2_oa": ("classifier_posteriors",),
    "classifier3_oa": ("classifier_posteriors",),
}

DEFAULT_SNR_CLIP = (0.6, 1.0)


@dataclass
class StrategyOutcome:
    """Per-utterance result of one strategy: the weight (scalar or per-frame
    vector), the fused audio, its transcript, and the error statistics."""

    s_prime: float
    weights: np.ndarray | None
    fused: Waveform
    transcript: str
    stats: EditStats

    @property
    def wer(self) -> float:
        return wer(self.stats)


class UtteranceContext:
    """Aligned pair plus a content-addressed decode cache, so each distinct
    waveform goes through the backend at most once per utterance."""

    def __init__(self, entry: ManifestEntry, backend, mode: ConfidenceMode,
                 eps: float, normalize: str, want: tuple[str, ...]):
        self.entry = entry
        self.backend = backend
        self.mode = mode
        self.eps = eps
        self.normalize = normalize
        self.want = want
        self.y, self.xhat = align_pair(load_wav(entry.noisy_path), load_wav(entry.enhanced_path))
        self._outputs: dict[bytes, AsrOutput] = {}
        self.decode_calls = 0

    def decode(self, w: Waveform) -> AsrOutput:
        key = hashlib.sha1(w.samples.tobytes()).digest()
        if key not in self._outputs:
            self._outputs[key] = self.backend.transcribe(w, self.want)
            self.decode_calls += 1
        return self._outputs[key]

    @property
    def out_y(self) -> AsrOutput:
        return self.decode(self.y)

    @property
    def out_x(self) -> AsrOutput:
        return self.decode(self.xhat)

    @property
    def conf_y(self) -> float:
        return utterance_confidence(self.out_y, self.mode)

    @property
    def conf_x(self) -> float:
        return utterance_confidence(self.out_x, self.mode)

    @property
    def ref_tokens(self) -> list[str]:
        if self.entry.ref_text is None:
            raise DataError(f"utterance '{self.entry.id}' has no ref_text, required here")
        return normalize_text(self.entry.ref_text, self.normalize)

    def score(self, transcript: str) -> EditStats:
        return edit_distance(self.ref_tokens, normalize_text(transcript, self.normalize))

    @property
    def stats_y(self) -> EditStats:
        return self.score(self.out_y.transcript)

    @property
    def stats_x(self) -> EditStats:
        return self.score(self.out_x.transcript)


def _frame_posterior(output: AsrOutput, which: str):
    if output.posterior is None:
        raise DataError(
            f"frame-level fusion needs a frame posterior for the {which} signal,"
            " but the backend provided none"
        )
    return output.posterior


def fuse_for_strategy(
    ctx: UtteranceContext, strategy: str, cfg: StrategyConfig = StrategyConfig()
) -> tuple[float, np.ndarray | None, Waveform]:
    """Compute one strategy's weight and the fused waveform.

    Returns (scalar weight or per-frame mean, per-frame weight vector when
    the strategy is frame-wise, fused audio). Hard switching returns the
    chosen input signal itself.
    """
    entry, eps = ctx.entry, ctx.eps

    if strategy == "conf_switch":
        choice = switch_decision(ctx.conf_y, ctx.conf_x)
        if choice is Choice.NOISY:
            return 1.0, None, ctx.y
        return 0.0, None, ctx.xhat

    if strategy == "frame_conf_oa":
        post_y = _frame_posterior(ctx.out_y, "noisy")
        post_x = _frame_posterior(ctx.out_x, "enhanced")
        if post_y.num_frames != post_x.num_frames:
            raise DataError(
                f"utterance '{entry.id}': frame counts differ"
                f" ({post_y.num_frames} vs {post_x.num_frames}); cannot fuse frame-wise"
            )
        w = frame_weights(
            frame_confidences(post_y, ctx.mode.q), frame_confidences(post_x, ctx.mode.q), eps
        )
        hop = len(ctx.y) // post_y.num_frames
        if hop < 1:
            raise DataError(f"utterance '{entry.id}': more posterior frames than samples")
        return float(w.mean()), w, fuse_frames(ctx.y, ctx.xhat, w, hop)

    if strategy == "wer_oracle_oa":
        s = weight_from_wer(wer(ctx.stats_y), wer(ctx.stats_x), eps)
    elif strategy == "conf_oa":
        s = weight_from_conf(ctx.conf_y, ctx.conf_x, eps)
    elif strategy == "snr_oa":
        s = weight_from_snr(entry.snr_db, cfg.snr_min_db, cfg.snr_max_db, None)
    elif strategy == "snr_oa_clip":
        s = weight_from_snr(entry.snr_db, cfg.snr_min_db, cfg.snr_max_db,
                            cfg.snr_clip or DEFAULT_SNR_CLIP)
    elif strategy == "dnsmos_oa":
        s = weight_from_dnsmos(entry.dnsmos_bak, entry.dnsmos_sig)
    elif strategy == "classifier2_oa":
        s = weight_from_classifier2(*entry.classifier_posteriors)
    elif strategy == "classifier3_oa":
        s = weight_from_classifier3(*entry.classifier_posteriors)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    return s, None, fuse_utterance(ctx.y, ctx.xhat, s)


def run_strategy(ctx: UtteranceContext, strategy: str,
                 cfg: StrategyConfig = StrategyConfig()) -> StrategyOutcome:
    """Compute one strategy's weight, fuse, decode the fused audio, score it.

    Hard switching reuses the chosen signal's cached transcript instead of
    decoding a third waveform (the content-addressed cache makes the reuse
    structural, not incidental).
    """
    s, w, fused = fuse_for_strategy(ctx, strategy, cfg)
    transcript = ctx.decode(fused).transcript
    return StrategyOutcome(s, w, fused, transcript, ctx.score(transcript))


def _order_strategies(strategies) -> list[str]:
    requested = set(strategies)
    unknown = requested - set(STRATEGIES)
    if unknown:
        raise ValueError(f"unknown strategies {sorted(unknown)}; known: {STRATEGIES}")
    return [s for s in STRATEGIES if s in requested]


def _check_required_fields(entries: Sequence[ManifestEntry], strategies: Sequence[str]) -> None:
    for strategy in strategies:
        for field in _REQUIRED_FIELDS.get(strategy, ()):
            missing = [e.id for e in entries if getattr(e, field) is None]
            if missing:
                raise DataError(
                    f"strategy '{strategy}' needs manifest field '{field}', missing for"
                    f" {len(missing)} utterances (first: '{missing[0]}')"
                )
    n_classes = {"classifier2_oa": 2, "classifier3_oa": 3}
    for strategy, n in n_classes.items():
        if strategy in strategies:
            bad = [e.id for e in entries if len(e.classifier_posteriors) != n]
            if bad:
                raise DataError(
                    f"strategy '{strategy}' needs {n} classifier posteriors, wrong count for"
                    f" {len(bad)} utterances (first: '{bad[0]}')"
                )


def _want_for(mode: ConfidenceMode, strategies: Sequence[str]) -> tuple[str, ...]:
    want = ["transcript"]
    if mode.kind == "segment":
        want.append("segments")
    elif mode.kind == "token":
        want.append("token_confidences")
    else:
        want.append("posterior")
    if "frame_conf_oa" in strategies and "posterior" not in want:
        want.append("posterior")
    return tuple(want)


def _probe_backend_id(backend_factory: Callable[[], object]) -> str:
    probe = backend_factory()
    try:
        return getattr(probe, "backend_id", "unknown")
    finally:
        probe.close()


class _WorkerPool:
    """Thread pool where each worker lazily opens its own backend."""

    def __init__(self, backend_factory: Callable[[], object], workers: int):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self._factory = backend_factory
        self._local = threading.local()
        self._backends: list = []
        self._lock = threading.Lock()
        self.workers = workers

    def backend(self):
        if not hasattr(self._local, "backend"):
            b = self._factory()
            with self._lock:
                self._backends.append(b)
            self._local.backend = b
        return self._local.backend

    def map(self, fn, items):
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, items))

    def close(self):
        for b in self._backends:
            b.close()


def _metadata(backend_id: str, mode: ConfidenceMode, eps: float, normalize: str,
              cfg: StrategyConfig, seed, failures: int) -> dict:
    return {
        "backend": backend_id,
        "conf_mode": mode.kind,
        "tsallis_q": f"{mode.q:g}",
        "eps": f"{eps:g}",
        "normalize": normalize,
        "seed": "-" if seed is None else str(seed),
        "snr_range_db": f"{cfg.snr_min_db:g}..{cfg.snr_max_db:g}",
        "snr_clip": "-" if cfg.snr_clip is None else f"{cfg.snr_clip[0]:g}..{cfg.snr_clip[1]:g}",
        "failures": str(failures),
    }


def evaluate(
    entries: Sequence[ManifestEntry],
    strategies,
    backend_factory: Callable[[], object],
    mode: ConfidenceMode = ConfidenceMode(),
    eps: float = 1e-8,
    workers: int = 1,
    normalize: str = "basic",
    strategy_cfg: StrategyConfig = StrategyConfig(),
    seed=None,
) -> EvalReport:
    """Score the raw-signal baselines plus every requested strategy.

    Utterances whose backend call fails are dropped from the aggregates and
    surfaced through the ``failures`` metadata count.
    """
    ordered = _order_strategies(strategies)
    _check_required_fields(entries, ordered)
    if any(e.ref_text is None for e in entries):
        raise DataError("evaluation needs ref_text for every manifest entry")
    want = _want_for(mode, ordered)
    backend_id = _probe_backend_id(backend_factory)
    pool = _WorkerPool(backend_factory, workers)

    def work(entry: ManifestEntry):
        try:
            ctx = UtteranceContext(entry, pool.backend(), mode, eps, normalize, want)
            per_method: dict[str, UttResult] = {}
            for method, stats, s in (
                ("noisy", ctx.stats_y, None),
                ("enhanced", ctx.stats_x, None),
            ):
                per_method[method] = UttResult(entry.id, stats.total, stats.ref_len, wer(stats), s)
            for strategy in ordered:
                outcome = run_strategy(ctx, strategy, strategy_cfg)
                per_method[strategy] = UttResult(
                    entry.id, outcome.stats.total, outcome.stats.ref_len,
                    outcome.wer, outcome.s_prime,
                )
            return entry.id, per_method, None
        except BackendError as exc:
            return entry.id, None, str(exc)

    try:
        results = pool.map(work, entries)
    finally:
        pool.close()

    failures = [(utt_id, err) for utt_id, _, err in results if err is not None]
    ok = sorted(
        ((utt_id, per_method) for utt_id, per_method, err in results if err is None),
        key=lambda item: item[0],
    )

    rows = []
    for method in list(BASELINE_METHODS) + ordered:
        utts = tuple(per_method[method] for _, per_method in ok)
        total_errors = sum(u.errors for u in utts)
        total_ref = sum(max(u.ref_len, 1) for u in utts)
        s_values = [u.s_prime for u in utts if u.s_prime is not None]
        rows.append(
            MethodRow(
                method=method,
                n_utts=len(utts),
                corpus_wer=total_errors / total_ref if total_ref else 0.0,
                mean_s_prime=(sum(s_values) / len(s_values)) if s_values else None,
                utterances=utts,
            )
        )

    metadata = _metadata(backend_id, mode, eps, normalize, strategy_cfg, seed, len(failures))
    return EvalReport(rows=tuple(rows), metadata=metadata)


def classify_calibration(wer_y: float, wer_x: float, conf_y: float, conf_x: float) -> str:
    """Confidence-calibration group of one utterance.

    Equal WERs are ambiguous. Otherwise look at the signal with the higher
    WER: strictly lower confidence than the other signal means the
    confidence is correct; higher or equal confidence is miscalibrated
    (an equal confidence cannot steer the switch away from the worse
    signal).
    """
    if wer_y == wer_x:
        return "ambiguous"
    conf_worse, conf_better = (conf_y, conf_x) if wer_y > wer_x else (conf_x, conf_y)
    return "confidence_correct" if conf_worse < conf_better else "miscalibrated"


def group_analysis(
    entries: Sequence[ManifestEntry],
    backend_factory: Callable[[], object],
    mode: ConfidenceMode = ConfidenceMode(),
    eps: float = 1e-8,
    workers: int = 1,
    normalize: str = "basic",
) -> GroupAnalysis:
    """Partition the corpus by confidence calibration, then by whether soft
    fusion beats hard switching on each utterance."""
    if any(e.ref_text is None for e in entries):
        raise DataError("group analysis needs ref_text for every manifest entry")
    want = _want_for(mode, ())
    backend_id = _probe_backend_id(backend_factory)
    pool = _WorkerPool(backend_factory, workers)

    def work(entry: ManifestEntry):
        try:
            ctx = UtteranceContext(entry, pool.backend(), mode, eps, normalize, want)
            wer_y, wer_x = wer(ctx.stats_y), wer(ctx.stats_x)
            switch = run_strategy(ctx, "conf_switch")
            oa = run_strategy(ctx, "conf_oa")
            group = classify_calibration(wer_y, wer_x, ctx.conf_y, ctx.conf_x)
            if oa.wer < switch.wer:
                subgroup = "oa_win"
            elif oa.wer > switch.wer:
                subgroup = "switch_win"
            else:
                subgroup = "tie"
            return entry.id, (group, subgroup, ctx.stats_y, ctx.stats_x, switch.stats, oa.stats), None
        except BackendError as exc:
            return entry.id, None, str(exc)

    try:
        results = pool.map(work, entries)
    finally:
        pool.close()

    failures = sum(1 for _, _, err in results if err is not None)
    assigned = [payload for _, payload, err in results if err is None]

    cells = []
    group_totals = {
        g: sum(1 for a in assigned if a[0] == g) for g in GROUPS
    }
    for group in GROUPS:
        for subgroup in SUBGROUPS:
            members = [a for a in assigned if a[0] == group and a[1] == subgroup]
            count = len(members)
            share = count / group_totals[group] if group_totals[group] else 0.0
            if members:
                wers = tuple(corpus_wer([m[k] for m in members]) for k in (2, 3, 4, 5))
            else:
                wers = (None, None, None, None)
            cells.append(GroupCell(group, subgroup, count, share, *wers))

    metadata = _metadata(backend_id, mode, eps, normalize, StrategyConfig(), None, failures)
    metadata["cell_wer"] = "pooled-within-cell"
    return GroupAnalysis(cells=tuple(cells), corpus_size=len(assigned), metadata=metadata)


def synth_corpus(
    n_utts: int,
    words_per_utt: int,
    vocab_size: int,
    snr_grid: Sequence[float],
    residual_noise: float,
    artifact_drop_prob: float,
    seed: int,
    out_dir,
) -> Path:
    """Generate a deterministic tone-word corpus and its manifest.

    SNRs cycle round-robin through ``snr_grid``; per-utterance noise and
    artifact draws come from seeds derived arithmetically from ``seed``, so
    the same call always produces byte-identical files. Audio paths in the
    manifest are relative, keeping the corpus relocatable.
    """
    if n_utts < 1 or words_per_utt < 1:
        raise ValueError("n_utts and words_per_utt must be positive")
    if not snr_grid:
        raise ValueError("snr_grid must not be empty")
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wavs"
    wav_dir.mkdir(parents=True, exist_ok=True)

    cfg = make_config(vocab_size)
    word_rng = np.random.default_rng(seed)
    manifest_path = out_dir / "manifest.jsonl"

    with open(manifest_path, "w", encoding="utf-8", newline="") as mf:
        for i in range(n_utts):
            utt_id = f"utt{i:04d}"
            word_ids = word_rng.integers(0, vocab_size, size=words_per_utt)
            snr_db = float(snr_grid[i % len(snr_grid)])
            clean, noisy, ref_text = synth_utterance(
                word_ids, snr_db, seed=seed * 1_000_000 + 2 * i, cfg=cfg
            )
            enhanced = simulate_enhancement(
                noisy, clean, residual_noise, artifact_drop_prob,
                seed=seed * 1_000_000 + 2 * i + 1, slot_samples=cfg.slot_samples,
            )
            save_wav(clean, wav_dir / f"{utt_id}_clean.wav", "float32")
            save_wav(noisy, wav_dir / f"{utt_id}_noisy.wav", "float32")
            save_wav(enhanced, wav_dir / f"{utt_id}_enhanced.wav", "float32")
            mf.write(
                json.dumps(
                    {
                        "id": utt_id,
                        "noisy_path": f"wavs/{utt_id}_noisy.wav",
                        "enhanced_path": f"wavs/{utt_id}_enhanced.wav",
                        "ref_text": ref_text,
                        "snr_db": snr_db,
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    (out_dir / "tone_config.json").write_text(cfg.to_json(), encoding="utf-8")
    return manifest_path
