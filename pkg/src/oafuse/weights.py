"""Fusion weight rules: every way the toolkit turns per-utterance evidence
into a mixing weight S' in [0, 1] (weight 1 = keep the noisy signal).

Soft rules normalize inverse WERs or raw confidences; the hard rule picks
one signal outright. Score-based baselines map SNR, MOS-style quality
scores, or external classifier posteriors onto the same scale.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

DEFAULT_EPS = 1e-8


class Choice(Enum):
    """Outcome of hard switching."""

    NOISY = "noisy"
    ENHANCED = "enhanced"


@dataclass(frozen=True)
class StrategyConfig:
    """Tunables shared by the score-based weight rules."""

    snr_min_db: float = 0.0
    snr_max_db: float = 20.0
    snr_clip: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.snr_min_db < self.snr_max_db:
            raise ValueError(f"snr_min_db {self.snr_min_db} must be < snr_max_db {self.snr_max_db}")
        if self.snr_clip is not None:
            lo, hi = self.snr_clip
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"snr clip range must satisfy 0 <= lo <= hi <= 1, got {self.snr_clip}")


def weight_from_wer(wer_y: float, wer_x: float, eps: float = DEFAULT_EPS) -> float:
    """Oracle weight from known error rates: inverse-WER normalization.

    The signal with the lower error rate gets the higher weight; eps guards
    the division when one transcript is perfect.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if wer_y < 0.0 or wer_x < 0.0:
        raise ValueError(f"error rates must be non-negative, got ({wer_y}, {wer_x})")
    inv_y = 1.0 / (wer_y + eps)
    inv_x = 1.0 / (wer_x + eps)
    return inv_y / (inv_y + inv_x)


def weight_from_conf(conf_y: float, conf_x: float, eps: float = DEFAULT_EPS) -> float:
    """Confidence weight: share of the noisy signal's confidence."""
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not (0.0 <= conf_y <= 1.0 and 0.0 <= conf_x <= 1.0):
        raise ValueError(f"confidences must lie in [0, 1], got ({conf_y}, {conf_x})")
    return (conf_y + eps) / ((conf_y + eps) + (conf_x + eps))


def switch_decision(conf_y: float, conf_x: float) -> Choice:
    """Hard selection: keep the noisy signal unless the enhanced one is
    strictly more confident (ties keep noisy)."""
    return Choice.NOISY if conf_y >= conf_x else Choice.ENHANCED


def weight_from_snr(
    snr_db: float,
    snr_min_db: float = 0.0,
    snr_max_db: float = 20.0,
    clip: tuple[float, float] | None = None,
) -> float:
    """Affine SNR-to-weight map, clamped to [0, 1], optionally clipped to a
    narrower band (the clipped variant keeps at least 60% noisy signal)."""
    if not snr_min_db < snr_max_db:
        raise ValueError(f"snr_min_db {snr_min_db} must be < snr_max_db {snr_max_db}")
    raw = (snr_db - snr_min_db) / (snr_max_db - snr_min_db)
    w = min(max(raw, 0.0), 1.0)
    if clip is not None:
        lo, hi = clip
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"clip range must satisfy 0 <= lo <= hi <= 1, got {clip}")
        w = min(max(w, lo), hi)
    return w


def weight_from_dnsmos(bak: float, sig: float) -> float:
    """Average of background and signal MOS scores, each mapped from the
    published [1, 5] scale onto [0, 1]."""
    for name, score in (("bak", bak), ("sig", sig)):
        if not (1.0 <= score <= 5.0):
            raise ValueError(f"{name} score must lie in [1, 5], got {score}")
    return ((bak - 1.0) / 4.0 + (sig - 1.0) / 4.0) / 2.0


def _check_distribution(probs, n: int) -> None:
    if len(probs) != n:
        raise ValueError(f"expected {n} class posteriors, got {len(probs)}")
    if any(p < 0.0 for p in probs):
        raise ValueError(f"class posteriors must be non-negative, got {probs}")
    if abs(sum(probs) - 1.0) > 1e-6:
        raise ValueError(f"class posteriors must sum to 1, got {probs}")


def weight_from_classifier2(p0: float, p1: float) -> float:
    """Two-class classifier weight: posterior of the noisy-is-better class."""
    _check_distribution((p0, p1), 2)
    return p0


def weight_from_classifier3(p0: float, p1: float, p2: float) -> float:
    """Three-class classifier weight: noisy-is-better posterior plus half
    the tie-class posterior."""
    _check_distribution((p0, p1, p2), 3)
    return p0 + 0.5 * p2


def frame_weights(conf_frames_y, conf_frames_x, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Elementwise confidence weights for per-frame fusion.

    The two signals must expose the same frame count; a mismatch means the
    enhancement changed the signal length and is reported, not truncated.
    """
    cy = np.asarray(conf_frames_y, dtype=np.float64)
    cx = np.asarray(conf_frames_x, dtype=np.float64)
    if cy.shape != cx.shape or cy.ndim != 1 or cy.size == 0:
        raise ValueError(f"frame confidence shapes differ or empty: {cy.shape} vs {cx.shape}")
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if np.any((cy < 0) | (cy > 1) | (cx < 0) | (cx > 1)):
        raise ValueError("frame confidences must lie in [0, 1]")
    return (cy + eps) / ((cy + eps) + (cx + eps))
