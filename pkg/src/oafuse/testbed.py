"""Deterministic synthetic speech world for desk-scale end-to-end runs.

Words are pure tones on a fixed frequency grid, one word per fixed-length
slot. Utterances mix in seeded white noise at an exact SNR; a fake
enhancement stage removes a controllable fraction of that noise and, with
some probability, zeroes whole word slots — the kind of artifact that makes
an enhanced signal worse than the noisy one for recognition.

Every slot frequency completes an integer number of cycles per slot, so the
single-bin spectral analysis used by the mock recognizer separates words
exactly; recognition errors come only from injected artifacts and silence,
which keeps corpus-level expectations easy to reason about.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import Waveform, _mix

DEFAULT_VOCAB = (
    "alfa", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
    "india", "juliett", "kilo", "lima", "mike", "november", "oscar", "papa",
    "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey",
    "xray", "yankee", "zulu",
)

DEFAULT_SLOT_SAMPLES = 3200  # 0.2 s at 16 kHz

TONE_AMPLITUDE = 0.5


@dataclass(frozen=True)
class ToneConfig:
    """Geometry of the tone-word world shared by synthesis and the mock
    recognizer."""

    sample_rate_hz: int = 16000
    f0_hz: float = 500.0
    delta_f_hz: float = 200.0
    slot_samples: int = DEFAULT_SLOT_SAMPLES
    vocab: tuple[str, ...] = DEFAULT_VOCAB
    noise_floor: float = 1e-9
    frames_per_slot: int = 1

    def __post_init__(self):
        object.__setattr__(self, "vocab", tuple(self.vocab))
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if len(self.vocab) < 1:
            raise ValueError("vocabulary must not be empty")
        if self.slot_samples <= 0:
            raise ValueError("slot_samples must be positive")
        if self.noise_floor <= 0.0:
            raise ValueError("noise_floor must be positive")
        if self.frames_per_slot <= 0 or self.slot_samples % self.frames_per_slot != 0:
            raise ValueError(
                f"frames_per_slot {self.frames_per_slot} must divide slot_samples {self.slot_samples}"
            )
        top = self.f0_hz + (len(self.vocab) - 1) * self.delta_f_hz
        if top >= self.sample_rate_hz / 2:
            raise ValueError(
                f"highest word frequency {top} Hz is not below Nyquist ({self.sample_rate_hz / 2} Hz)"
            )

    @property
    def word_freqs_hz(self) -> np.ndarray:
        return self.f0_hz + self.delta_f_hz * np.arange(len(self.vocab))

    @property
    def blank_id(self) -> int:
        return len(self.vocab)

    @property
    def class_labels(self) -> list[str]:
        return list(self.vocab) + ["<blank>"]

    def to_json(self) -> str:
        return json.dumps(
            {
                "sample_rate_hz": self.sample_rate_hz,
                "f0_hz": self.f0_hz,
                "delta_f_hz": self.delta_f_hz,
                "slot_samples": self.slot_samples,
                "vocab": list(self.vocab),
                "noise_floor": self.noise_floor,
                "frames_per_slot": self.frames_per_slot,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ToneConfig":
        obj = json.loads(text)
        obj["vocab"] = tuple(obj["vocab"])
        return cls(**obj)

    @classmethod
    def from_file(cls, path) -> "ToneConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def make_config(vocab_size: int | None = None, **kwargs) -> ToneConfig:
    """ToneConfig with the default vocabulary truncated to ``vocab_size``."""
    if vocab_size is not None:
        if not (1 <= vocab_size <= len(DEFAULT_VOCAB)):
            raise ValueError(f"vocab_size must be in [1, {len(DEFAULT_VOCAB)}], got {vocab_size}")
        kwargs.setdefault("vocab", DEFAULT_VOCAB[:vocab_size])
    return ToneConfig(**kwargs)


def synth_utterance(
    word_ids, snr_db: float, seed: int, cfg: ToneConfig
) -> tuple[Waveform, Waveform, str]:
    """Render words as slot tones and add seeded white noise at an exact SNR.

    Returns (clean, noisy, reference text). Deterministic for a given seed.
    """
    ids = [int(w) for w in word_ids]
    for w in ids:
        if not (0 <= w < len(cfg.vocab)):
            raise ValueError(f"word id {w} outside vocabulary of size {len(cfg.vocab)}")

    n = np.arange(cfg.slot_samples, dtype=np.float64)
    slots = []
    for w in ids:
        freq = cfg.f0_hz + w * cfg.delta_f_hz
        slots.append(TONE_AMPLITUDE * np.sin(2.0 * np.pi * freq * n / cfg.sample_rate_hz))
    clean64 = np.concatenate(slots) if slots else np.zeros(0, dtype=np.float64)

    if clean64.size == 0:
        empty = Waveform(cfg.sample_rate_hz, clean64)
        return empty, empty, ""

    signal_power = float(np.mean(clean64**2))
    noise = np.random.default_rng(seed).standard_normal(clean64.size)
    target_noise_power = signal_power / (10.0 ** (snr_db / 10.0))
    noise *= np.sqrt(target_noise_power / float(np.mean(noise**2)))
    noisy64 = clean64 + noise

    clean = Waveform(cfg.sample_rate_hz, clean64)
    noisy = Waveform(cfg.sample_rate_hz, noisy64)
    ref_text = " ".join(cfg.vocab[w] for w in ids)
    return clean, noisy, ref_text


def simulate_enhancement(
    noisy: Waveform,
    clean: Waveform,
    residual_noise: float,
    artifact_drop_prob: float,
    seed: int,
    slot_samples: int = DEFAULT_SLOT_SAMPLES,
) -> Waveform:
    """Fake enhancement: keep a fraction of the noise, then zero whole word
    slots with the given probability (seeded) to model speech-deleting
    artifacts.
    """
    if not (0.0 <= residual_noise <= 1.0):
        raise ValueError(f"residual_noise must lie in [0, 1], got {residual_noise}")
    if not (0.0 <= artifact_drop_prob <= 1.0):
        raise ValueError(f"artifact_drop_prob must lie in [0, 1], got {artifact_drop_prob}")
    if noisy.sample_rate_hz != clean.sample_rate_hz or len(noisy) != len(clean):
        raise ValueError("noisy and clean inputs must be aligned")

    out = _mix(noisy, clean, float(residual_noise))  # residual*noisy + (1-residual)*clean
    if len(out) == 0:
        return out
    n_slots = (len(out) + slot_samples - 1) // slot_samples
    draws = np.random.default_rng(seed).random(n_slots)
    samples = np.array(out.samples, copy=True)
    for k in np.nonzero(draws < artifact_drop_prob)[0]:
        samples[k * slot_samples : (k + 1) * slot_samples] = 0.0
    return Waveform(out.sample_rate_hz, samples)


def _bin_powers(frames: np.ndarray, freqs_hz: np.ndarray, sample_rate_hz: int) -> np.ndarray:
    """Single-bin spectral power of each frame at each probe frequency.

    Scaled so a full-scale sine of amplitude A at a probed frequency scores
    its mean-square power A^2/2. Plain elementwise-multiply-and-sum keeps
    the reduction order fixed regardless of BLAS threading.
    """
    n = frames.shape[1]
    t = np.arange(n, dtype=np.float64) / sample_rate_hz
    powers = np.empty((frames.shape[0], freqs_hz.size), dtype=np.float64)
    for j, f in enumerate(freqs_hz):
        omega_t = 2.0 * np.pi * f * t
        re = (frames * np.cos(omega_t)).sum(axis=1)
        im = (frames * np.sin(omega_t)).sum(axis=1)
        powers[:, j] = 2.0 * (re**2 + im**2) / (n * n)
    return powers


def analyze_slots(samples: np.ndarray, cfg: ToneConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-slot and per-frame class posteriors for a waveform.

    Returns (slot_posteriors, frame_posteriors), each rows-sum-to-1 arrays
    with one column per vocabulary word plus a final blank/silence column
    whose raw score is the configured noise floor. Trailing samples short of
    a full slot are ignored.
    """
    n_slots = samples.size // cfg.slot_samples
    w = len(cfg.vocab)
    if n_slots == 0:
        return np.zeros((0, w + 1)), np.zeros((0, w + 1))
    x = np.asarray(samples[: n_slots * cfg.slot_samples], dtype=np.float64)

    slot_frames = x.reshape(n_slots, cfg.slot_samples)
    slot_posteriors = _posteriors_from_powers(
        _bin_powers(slot_frames, cfg.word_freqs_hz, cfg.sample_rate_hz), cfg.noise_floor
    )

    if cfg.frames_per_slot == 1:
        frame_posteriors = slot_posteriors
    else:
        sub = x.reshape(n_slots * cfg.frames_per_slot, cfg.slot_samples // cfg.frames_per_slot)
        frame_posteriors = _posteriors_from_powers(
            _bin_powers(sub, cfg.word_freqs_hz, cfg.sample_rate_hz), cfg.noise_floor
        )
    return slot_posteriors, frame_posteriors


def _posteriors_from_powers(powers: np.ndarray, noise_floor: float) -> np.ndarray:
    scores = np.concatenate(
        [powers, np.full((powers.shape[0], 1), noise_floor)], axis=1
    )
    return scores / scores.sum(axis=1, keepdims=True)
