"""ASR confidence scores from raw decoder artifacts.

Three routes to an utterance confidence in [0, 1]:

* segment statistics: token-weighted average of exp(mean segment logprob),
* token confidences: geometric mean of per-token scores,
* frame posteriors: Tsallis-entropy frame confidence, min-pooled over the
  frame span behind each greedily decoded token, then geometric mean.

All functions are pure; empty hypotheses fall back to a tiny floor so a
recognizer that produced nothing never wins a fusion decision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Floor applied to empty hypotheses and to zero token confidences before
# taking logs; keeps every confidence finite and strictly positive.
CONFIDENCE_FLOOR = 1e-8

# Row sums beyond this tolerance signal a corrupt posterior file rather
# than float rounding; inside it, rows are silently re-normalized.
ROW_SUM_TOLERANCE = 1e-3

DEFAULT_TSALLIS_Q = 0.33


@dataclass(frozen=True)
class SegmentStat:
    """Mean token log-probability (natural log) and token count of one
    decoded segment."""

    avg_logprob: float
    num_tokens: int

    def __post_init__(self):
        if not np.isfinite(self.avg_logprob):
            raise ValueError(f"avg_logprob must be finite, got {self.avg_logprob}")
        if self.avg_logprob > 0.0:
            raise ValueError(f"avg_logprob must be <= 0 (natural-log scale), got {self.avg_logprob}")
        if self.num_tokens < 1:
            raise ValueError(f"num_tokens must be >= 1, got {self.num_tokens}")


@dataclass(frozen=True)
class TokenSpan:
    """Contiguous frame run [start_frame, end_frame] backing one decoded
    token under greedy blank-collapse decoding."""

    class_id: int
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if self.start_frame > self.end_frame:
            raise ValueError(f"span start {self.start_frame} > end {self.end_frame}")


class PosteriorMatrix:
    """T x V per-frame probability distributions, rows re-normalized on load.

    ``blank_id`` marks the blank/silence class used by greedy span
    extraction; it may be None for matrices that never feed CTC decoding.
    """

    def __init__(self, probs, blank_id: int | None = None):
        arr = np.array(probs, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"posterior must be 2-D (frames x classes), got shape {arr.shape}")
        t, v = arr.shape
        if t < 1:
            raise ValueError("posterior needs at least one frame")
        if v < 2:
            raise ValueError(f"posterior needs at least 2 classes, got {v}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("posterior contains NaN or Inf")
        if np.any(arr < 0.0):
            raise ValueError("posterior contains negative probabilities")
        sums = arr.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(
                f"posterior row {bad} sums to {sums[bad]:.6f}, outside 1 +/- {ROW_SUM_TOLERANCE}"
            )
        arr /= sums[:, None]
        if blank_id is not None and not (0 <= blank_id < v):
            raise ValueError(f"blank_id {blank_id} out of range for {v} classes")
        self.probs = arr
        self.probs.flags.writeable = False
        self.blank_id = None if blank_id is None else int(blank_id)

    @property
    def num_frames(self) -> int:
        return self.probs.shape[0]

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]


def _validate_q(q: float) -> float:
    if not (0.0 < q < 1.0):
        raise ValueError(f"entropy order q must lie in (0, 1), got {q}")
    return float(q)


def _tsallis_conf_rows(rows: np.ndarray, q: float) -> np.ndarray:
    """Vectorized generalized-entropy confidence over probability rows.

    H = (1 - sum p^q) / (q - 1), mapped through exp(-H) and rescaled so a
    one-hot row gives exactly 1 and a uniform row gives 0.
    """
    v = rows.shape[1]
    h = (1.0 - np.power(rows, q).sum(axis=1)) / (q - 1.0)
    h_max = (1.0 - v ** (1.0 - q)) / (q - 1.0)
    scale = 1.0 - np.exp(-h_max)
    return (np.exp(-h) - np.exp(-h_max)) / scale


def tsallis_confidence(p, q: float = DEFAULT_TSALLIS_Q) -> float:
    """Confidence of one probability distribution via Tsallis entropy with
    exponential normalization. One-hot -> 1, uniform -> 0."""
    q = _validate_q(q)
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("p must be a 1-D distribution over at least 2 classes")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError("p must be finite and non-negative")
    total = arr.sum()
    if abs(total - 1.0) > ROW_SUM_TOLERANCE:
        raise ValueError(f"p sums to {total:.6f}, not a distribution")
    arr = arr / total
    return float(_tsallis_conf_rows(arr[None, :], q)[0])


def segment_confidence(segments) -> float:
    """Token-weighted average of per-segment exp(mean logprob).

    An empty segment list (the recognizer decoded nothing) returns the
    confidence floor.
    """
    segs = list(segments)
    if not segs:
        return CONFIDENCE_FLOOR
    total_tokens = sum(s.num_tokens for s in segs)
    weighted = sum(s.num_tokens * float(np.exp(s.avg_logprob)) for s in segs)
    return weighted / total_tokens


def geometric_mean_confidence(token_confs) -> float:
    """Geometric mean of token confidences in [0, 1].

    Zeros are floored before the log so one impossible token yields a tiny
    but finite utterance confidence; an empty list returns the floor.
    """
    confs = np.asarray(list(token_confs), dtype=np.float64)
    if confs.size == 0:
        return CONFIDENCE_FLOOR
    if np.any(confs < 0.0) or np.any(confs > 1.0) or not np.all(np.isfinite(confs)):
        raise ValueError("token confidences must lie in [0, 1]")
    floored = np.maximum(confs, CONFIDENCE_FLOOR)
    return float(np.exp(np.log(floored).mean()))


def ctc_greedy_spans(m: PosteriorMatrix) -> list[TokenSpan]:
    """Greedy blank-collapse decoding: per-frame argmax, consecutive equal
    classes form one run, blank runs are dropped.

    Argmax ties break toward the lowest class index so results are
    platform-independent. A class re-appearing after a blank run yields a
    new span (two tokens), as usual for blank-collapse decoding.
    """
    if m.blank_id is None:
        raise ValueError("posterior has no blank_id; greedy span extraction needs one")
    ids = np.argmax(m.probs, axis=1)  # first max wins: lowest-index tie-break
    spans: list[TokenSpan] = []
    start = 0
    for t in range(1, len(ids) + 1):
        if t == len(ids) or ids[t] != ids[start]:
            if ids[start] != m.blank_id:
                spans.append(TokenSpan(int(ids[start]), start, t - 1))
            start = t
    return spans


def ctc_token_confidences(m: PosteriorMatrix, q: float = DEFAULT_TSALLIS_Q) -> list[float]:
    """Per-token confidence: frame-level Tsallis confidence min-pooled over
    each greedy span, in span order."""
    spans = ctc_greedy_spans(m)
    frame_confs = _tsallis_conf_rows(m.probs, _validate_q(q))
    return [float(frame_confs[s.start_frame : s.end_frame + 1].min()) for s in spans]


def frame_confidences(m: PosteriorMatrix, q: float = DEFAULT_TSALLIS_Q) -> np.ndarray:
    """Tsallis confidence of every frame (blank frames included)."""
    return _tsallis_conf_rows(m.probs, _validate_q(q))
