"""Generate the committed golden evaluation report for the regression gate.

This is the reference oracle for the end-to-end pipeline: a deliberately
straight-line re-derivation of the evaluation report. It shares only the
corpus synthesis and the mock recognizer with the system under test (they
are the fixed environment); confidences, weights, word error rates,
aggregation, and TSV formatting are all recomputed inline, with an
independent two-row Levenshtein for the error counts.

Run from the repository root:  python scripts/make_golden_report.py
"""
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from oafuse.audio import Waveform, load_wav
from oafuse.backend import tone_asr_transcribe
from oafuse.harness import synth_corpus
from oafuse.testbed import ToneConfig

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = ROOT / "tests" / "data" / "golden_eval.tsv"

EPS = 1e-8
SEED = 42
CORPUS = dict(n_utts=200, words_per_utt=6, vocab_size=8,
              snr_grid=[-5.0, 0.0, 5.0, 10.0],
              residual_noise=0.15, artifact_drop_prob=0.15)


def levenshtein(a, b):
    """Two-row distance-only implementation."""
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j - 1] + (ca != cb), prev[j] + 1, cur[-1] + 1))
        prev = cur
    return prev[-1]


def confidence(output):
    """Geometric mean of token confidences with the 1e-8 floor."""
    confs = [max(c, EPS) for c in output.token_confidences]
    if not confs:
        return EPS
    return float(np.exp(np.mean(np.log(np.asarray(confs, dtype=np.float64)))))


def mix(y, x, s, rate):
    # same canonical coefficient convention as the toolkit's fusion kernel
    yd = y.astype(np.float64)
    xd = x.astype(np.float64)
    wx = 1.0 - s
    wy = s if s >= 0.5 else 1.0 - wx
    return Waveform(rate, (wy * yd + wx * xd).astype(np.float32))


def main():
    workdir = Path(tempfile.mkdtemp(prefix="golden_corpus_"))
    manifest_path = synth_corpus(seed=SEED, out_dir=workdir, **CORPUS)
    cfg = ToneConfig.from_file(workdir / "tone_config.json")

    methods = ["noisy", "enhanced", "wer_oracle_oa", "conf_oa", "conf_switch"]
    errors = {m: 0 for m in methods}
    ref_tokens_total = 0
    s_values = {m: [] for m in methods}
    n = 0

    for line in open(manifest_path, encoding="utf-8"):
        entry = json.loads(line)
        ref = entry["ref_text"].split()
        ref_tokens_total += max(len(ref), 1)
        n += 1
        y = load_wav(workdir / entry["noisy_path"])
        x = load_wav(workdir / entry["enhanced_path"])
        out_y = tone_asr_transcribe(y, cfg)
        out_x = tone_asr_transcribe(x, cfg)
        d_y = levenshtein(ref, out_y.transcript.split())
        d_x = levenshtein(ref, out_x.transcript.split())
        errors["noisy"] += d_y
        errors["enhanced"] += d_x

        wer_y, wer_x = d_y / len(ref), d_x / len(ref)
        s_oracle = (1 / (wer_y + EPS)) / ((1 / (wer_y + EPS)) + (1 / (wer_x + EPS)))
        fused = mix(y.samples, x.samples, s_oracle, y.sample_rate_hz)
        errors["wer_oracle_oa"] += levenshtein(ref, tone_asr_transcribe(fused, cfg).transcript.split())
        s_values["wer_oracle_oa"].append(s_oracle)

        conf_y, conf_x = confidence(out_y), confidence(out_x)
        s_conf = (conf_y + EPS) / ((conf_y + EPS) + (conf_x + EPS))
        fused = mix(y.samples, x.samples, s_conf, y.sample_rate_hz)
        errors["conf_oa"] += levenshtein(ref, tone_asr_transcribe(fused, cfg).transcript.split())
        s_values["conf_oa"].append(s_conf)

        if conf_y >= conf_x:
            errors["conf_switch"] += d_y
            s_values["conf_switch"].append(1.0)
        else:
            errors["conf_switch"] += d_x
            s_values["conf_switch"].append(0.0)

    corpus_wer = {m: errors[m] / ref_tokens_total for m in methods}
    if not corpus_wer["wer_oracle_oa"] <= corpus_wer["conf_oa"]:
        sys.exit("trend violated: oracle weighting must not lose to confidence weighting")

    metadata = {
        "backend": "mock",
        "conf_mode": "token",
        "eps": "1e-08",
        "failures": "0",
        "normalize": "basic",
        "seed": str(SEED),
        "snr_clip": "-",
        "snr_range_db": "0..20",
        "tsallis_q": "0.33",
    }
    lines = ["# oafuse-eval-report\tv1"]
    lines += [f"# {k}\t{metadata[k]}" for k in sorted(metadata)]
    lines.append("method\tn_utts\tcorpus_wer_pct\tmean_s_prime")
    for m in methods:
        mean_s = "-" if not s_values[m] else f"{sum(s_values[m]) / len(s_values[m]):.4f}"
        lines.append(f"{m}\t{n}\t{100.0 * corpus_wer[m]:.2f}\t{mean_s}")
    GOLDEN.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="")

    print(f"wrote {GOLDEN}")
    for m in methods:
        print(f"  {m:15s} {100 * corpus_wer[m]:6.2f}%")


if __name__ == "__main__":
    main()
