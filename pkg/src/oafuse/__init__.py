"""Confidence-guided fusion of noisy and enhanced speech.

The package blends a noisy waveform with its enhanced counterpart using
weights derived from how intelligible a backend recognizer finds each one,
evaluates every weighting rule over manifest-driven corpora, and ships a
deterministic tone-word testbed so the whole pipeline is verifiable without
neural models.
"""
from .audio import (
    Waveform,
    align_pair,
    expand_frame_weights,
    fuse_frames,
    fuse_utterance,
    load_wav,
    save_wav,
)
from .backend import (
    AsrOutput,
    BackendHandle,
    ConfidenceMode,
    HttpBackend,
    MockBackend,
    SubprocessBackend,
    open_backend,
    tone_asr_transcribe,
    transcribe,
    utterance_confidence,
)
from .confidence import (
    PosteriorMatrix,
    SegmentStat,
    TokenSpan,
    ctc_greedy_spans,
    ctc_token_confidences,
    frame_confidences,
    geometric_mean_confidence,
    segment_confidence,
    tsallis_confidence,
)
from .errors import BackendError, DataError, OAFuseError, ProtocolError
from .harness import (
    STRATEGIES,
    UtteranceContext,
    evaluate,
    group_analysis,
    run_strategy,
    synth_corpus,
)
from .manifest import ManifestEntry, load_manifest
from .metrics import (
    EditStats,
    classifier_label_2class,
    classifier_label_3class,
    corpus_wer,
    edit_distance,
    normalize_text,
    wer,
)
from .report import EvalReport, GroupAnalysis, emit_report, render_report
from .testbed import ToneConfig, make_config, simulate_enhancement, synth_utterance
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

__version__ = "0.1.0"
