"""Recognizer wrappers.

Each recognizer returns a ``Decoded`` carrying whatever raw confidence
artifacts its model family exposes; the adapter never computes confidence
itself, it only exports the raw statistics so all confidence math lives in
the evaluation toolkit.

Real models (Whisper via openai-whisper, CTC via transformers) import their
frameworks lazily so the adapter — and its protocol tests — run without
them. The ``stub-*`` families are tiny deterministic signal-derived models
for integration testing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Decoded:
    """Raw decoder output: transcript plus family-specific artifacts."""

    transcript: str
    segments: list[dict] | None = None           # [{"avg_logprob", "num_tokens"}]
    token_confidences: list[float] | None = None
    posterior: np.ndarray | None = None          # frames x classes probabilities
    class_labels: list[str] | None = None
    blank_id: int | None = None


def extract_segment_stats(whisper_segments) -> list[dict]:
    """Segment statistics from a Whisper-style result, order preserved.

    avg_logprob is natural-log scale already; values are clamped to <= 0
    because a few decoders emit marginally positive averages that the
    consumer's schema rejects.
    """
    stats = []
    for seg in whisper_segments:
        tokens = seg.get("tokens", [])
        stats.append(
            {
                "avg_logprob": min(float(seg["avg_logprob"]), 0.0),
                "num_tokens": max(len(tokens), 1),
            }
        )
    return stats


class StubSeq2SeqRecognizer:
    """Deterministic stand-in for a segment-based seq2seq recognizer.

    Emits one segment per 0.5 s of voiced audio; the per-segment average
    log-probability falls with the segment's zero-crossing rate, so noisier
    audio reads as less confident.
    """

    family = "seq2seq"
    artifacts = frozenset({"segments"})

    def decode(self, samples: np.ndarray, sample_rate: int) -> Decoded:
        chunk = sample_rate // 2
        words, segments = [], []
        for k in range(len(samples) // chunk):
            piece = samples[k * chunk : (k + 1) * chunk].astype(np.float64)
            rms = float(np.sqrt(np.mean(piece**2)))
            if rms < 1e-4:
                continue
            flips = float(np.mean(np.signbit(piece[1:]) != np.signbit(piece[:-1])))
            words.append(f"seg{k}")
            segments.append(
                {"avg_logprob": -round(min(flips * 2.0, 5.0), 6), "num_tokens": 1}
            )
        return Decoded(transcript=" ".join(words), segments=segments)


class StubCtcRecognizer:
    """Deterministic stand-in for a CTC recognizer with frame posteriors.

    Frames are 320 samples; each frame's energy and zero-crossing rate pick
    a letter class, softmax temperature fixed, blank wins silent frames.
    """

    family = "ctc"
    artifacts = frozenset({"token_confidences", "posterior"})

    LABELS = ["<blank>", "a", "e", "s", "t"]

    def decode(self, samples: np.ndarray, sample_rate: int) -> Decoded:
        hop = 320
        n_frames = len(samples) // hop
        if n_frames == 0:
            return Decoded(
                transcript="", token_confidences=[], posterior=None,
                class_labels=list(self.LABELS), blank_id=0,
            )
        frames = samples[: n_frames * hop].astype(np.float64).reshape(n_frames, hop)
        rms = np.sqrt(np.mean(frames**2, axis=1))
        flips = np.mean(np.signbit(frames[:, 1:]) != np.signbit(frames[:, :-1]), axis=1)
        # fixed linear scores per class, then a softmax
        scores = np.stack(
            [
                2.0 - 40.0 * rms,          # blank: silence
                8.0 * rms + 1.0 * flips,   # 'a': loud
                6.0 * rms + 4.0 * flips,   # 'e': loud and busy
                10.0 * flips,              # 's': busy
                3.0 * rms + 2.0 * flips,   # 't': middling
            ],
            axis=1,
        )
        exp = np.exp(scores - scores.max(axis=1, keepdims=True))
        posterior = exp / exp.sum(axis=1, keepdims=True)

        ids = np.argmax(posterior, axis=1)
        tokens, confs = [], []
        prev = -1
        for t, c in enumerate(ids):
            if c != prev and c != 0:
                tokens.append(self.LABELS[c])
                confs.append(round(float(posterior[t, c]), 6))
            prev = c
        return Decoded(
            transcript="".join(tokens),
            token_confidences=confs,
            posterior=posterior,
            class_labels=list(self.LABELS),
            blank_id=0,
        )


class WhisperRecognizer:
    """openai-whisper wrapper exposing segment average log-probabilities."""

    family = "seq2seq"
    artifacts = frozenset({"segments"})

    def __init__(self, model_id: str, device: str = "cpu"):
        import whisper  # lazy: heavyweight optional dependency

        self._model = whisper.load_model(model_id, device=device)

    def decode(self, samples: np.ndarray, sample_rate: int) -> Decoded:
        if sample_rate != 16000:
            raise ValueError(f"whisper expects 16 kHz input, got {sample_rate}")
        result = self._model.transcribe(samples.astype(np.float32), fp16=False)
        return Decoded(
            transcript=result.get("text", "").strip(),
            segments=extract_segment_stats(result.get("segments", [])),
        )


class Wav2Vec2Recognizer:
    """transformers CTC wrapper exporting softmaxed frame posteriors."""

    family = "ctc"
    artifacts = frozenset({"posterior"})

    def __init__(self, model_id: str, device: str = "cpu"):
        import torch  # lazy: heavyweight optional dependency
        from transformers import Wav2Vec2ForCTC, Wav2Vec2Processor

        self._torch = torch
        self._processor = Wav2Vec2Processor.from_pretrained(model_id)
        self._model = Wav2Vec2ForCTC.from_pretrained(model_id).to(device).eval()
        self._device = device

    def decode(self, samples: np.ndarray, sample_rate: int) -> Decoded:
        torch = self._torch
        inputs = self._processor(
            samples.astype(np.float32), sampling_rate=sample_rate, return_tensors="pt"
        )
        with torch.no_grad():
            logits = self._model(inputs.input_values.to(self._device)).logits[0]
        posterior = torch.softmax(logits, dim=-1).cpu().numpy()
        ids = posterior.argmax(axis=1)
        transcript = self._processor.decode(ids)
        tokenizer = self._processor.tokenizer
        labels = tokenizer.convert_ids_to_tokens(list(range(posterior.shape[1])))
        return Decoded(
            transcript=transcript,
            posterior=posterior,
            class_labels=labels,
            blank_id=int(tokenizer.pad_token_id),
        )


def build_recognizer(model_spec: str, device: str = "cpu"):
    """``stub-seq2seq``, ``stub-ctc``, ``whisper:<model>``, or
    ``wav2vec2:<model>``."""
    if model_spec == "stub-seq2seq":
        return StubSeq2SeqRecognizer()
    if model_spec == "stub-ctc":
        return StubCtcRecognizer()
    if model_spec.startswith("whisper:"):
        return WhisperRecognizer(model_spec.split(":", 1)[1], device)
    if model_spec.startswith("wav2vec2:"):
        return Wav2Vec2Recognizer(model_spec.split(":", 1)[1], device)
    raise ValueError(
        f"unknown model spec {model_spec!r}; use stub-seq2seq, stub-ctc,"
        " whisper:<id>, or wav2vec2:<id>"
    )
