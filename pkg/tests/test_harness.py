import json

import numpy as np
import pytest

from oafuse.backend import ConfidenceMode, MockBackend
from oafuse.errors import BackendError, DataError
from oafuse.harness import (
    UtteranceContext,
    evaluate,
    group_analysis,
    run_strategy,
    synth_corpus,
)
from oafuse.manifest import ManifestEntry, load_manifest
from oafuse.report import EvalReport, GroupAnalysis, render_report
from oafuse.testbed import ToneConfig
from oafuse.weights import StrategyConfig

TOKEN_MODE = ConfidenceMode("token")
WANT = ("transcript", "token_confidences", "posterior")


class _CountingBackend:
    """Mock backend that counts transcribe calls."""

    def __init__(self, cfg):
        self.inner = MockBackend(cfg)
        self.backend_id = "counting-mock"
        self.calls = 0

    def transcribe(self, w, want=WANT):
        self.calls += 1
        return self.inner.transcribe(w, want)

    def close(self):
        pass


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    manifest = synth_corpus(
        n_utts=12, words_per_utt=5, vocab_size=8, snr_grid=[-5, 0, 5, 10],
        residual_noise=0.15, artifact_drop_prob=0.3, seed=7, out_dir=out,
    )
    cfg = ToneConfig.from_file(out / "tone_config.json")
    return load_manifest(manifest), cfg, out


def _ctx(entry, backend, eps=1e-8):
    return UtteranceContext(entry, backend, TOKEN_MODE, eps, "basic", WANT)


class TestRunStrategy:
    def test_equal_confidence_gives_midpoint(self, small_corpus, monkeypatch):
        entries, cfg, _ = small_corpus
        ctx = _ctx(entries[0], MockBackend(cfg))
        monkeypatch.setattr(UtteranceContext, "conf_y", property(lambda self: 0.6))
        monkeypatch.setattr(UtteranceContext, "conf_x", property(lambda self: 0.6))
        outcome = run_strategy(ctx, "conf_oa")
        assert outcome.s_prime == pytest.approx(0.5, abs=1e-12)
        midpoint = 0.5 * (
            ctx.y.samples.astype(np.float64) + ctx.xhat.samples.astype(np.float64)
        ).astype(np.float32)
        assert np.array_equal(outcome.fused.samples, midpoint)

    def test_switch_reuses_transcript_without_decode(self, small_corpus):
        entries, cfg, _ = small_corpus
        backend = _CountingBackend(cfg)
        ctx = _ctx(entries[0], backend)
        outcome = run_strategy(ctx, "conf_switch")
        assert backend.calls == 2  # y and xhat only, no third decode
        source = ctx.out_y if outcome.s_prime == 1.0 else ctx.out_x
        assert outcome.transcript == source.transcript

    def test_soft_strategy_decodes_fused_once(self, small_corpus):
        entries, cfg, _ = small_corpus
        backend = _CountingBackend(cfg)
        ctx = _ctx(entries[0], backend)
        run_strategy(ctx, "conf_oa")
        assert backend.calls == 3
        run_strategy(ctx, "conf_oa")  # identical fused waveform: cache hit
        assert backend.calls == 3

    def test_wer_oracle_on_perfect_noisy_reproduces_it(self, small_corpus):
        entries, cfg, _ = small_corpus
        for entry in entries:
            ctx = _ctx(entry, MockBackend(cfg))
            if ctx.stats_y.total == 0 and ctx.stats_x.total > 0:
                outcome = run_strategy(ctx, "wer_oracle_oa")
                assert np.max(np.abs(outcome.fused.samples - ctx.y.samples)) < 1e-6
                return
        pytest.fail("corpus should contain a perfect-noisy/imperfect-enhanced pair")

    def test_snr_strategy_uses_manifest_field(self, small_corpus):
        entries, cfg, _ = small_corpus
        ctx = _ctx(entries[0], MockBackend(cfg))
        outcome = run_strategy(ctx, "snr_oa", StrategyConfig(snr_min_db=-10, snr_max_db=10))
        expected = (entries[0].snr_db + 10) / 20
        assert outcome.s_prime == pytest.approx(min(max(expected, 0.0), 1.0), abs=1e-12)

    def test_frame_strategy_returns_weight_vector(self, small_corpus):
        entries, cfg, _ = small_corpus
        ctx = _ctx(entries[0], MockBackend(cfg))
        outcome = run_strategy(ctx, "frame_conf_oa")
        assert outcome.weights is not None
        assert len(outcome.weights) == ctx.out_y.posterior.num_frames
        assert 0.0 <= outcome.s_prime <= 1.0

    def test_unknown_strategy(self, small_corpus):
        entries, cfg, _ = small_corpus
        with pytest.raises(ValueError, match="unknown strategy"):
            run_strategy(_ctx(entries[0], MockBackend(cfg)), "prayer")


class TestEvaluate:
    def test_empty_strategy_set_keeps_baselines(self, small_corpus):
        entries, cfg, _ = small_corpus
        report = evaluate(entries[:3], [], lambda: MockBackend(cfg))
        assert [r.method for r in report.rows] == ["noisy", "enhanced"]

    def test_rows_in_canonical_order(self, small_corpus):
        entries, cfg, _ = small_corpus
        report = evaluate(
            entries[:3], ["conf_switch", "wer_oracle_oa", "conf_oa"], lambda: MockBackend(cfg)
        )
        assert [r.method for r in report.rows] == [
            "noisy", "enhanced", "wer_oracle_oa", "conf_oa", "conf_switch",
        ]

    def test_worker_count_does_not_change_report(self, small_corpus):
        entries, cfg, _ = small_corpus
        reports = [
            render_report(
                evaluate(entries, ["wer_oracle_oa", "conf_oa", "conf_switch"],
                         lambda: MockBackend(cfg), workers=w, seed=7),
                "tsv",
            )
            for w in (1, 4)
        ]
        assert reports[0] == reports[1]

    def test_utterances_sorted_by_id(self, small_corpus):
        entries, cfg, _ = small_corpus
        shuffled = list(reversed(entries))
        report = evaluate(shuffled, [], lambda: MockBackend(cfg))
        ids = [u.utt_id for u in report.rows[0].utterances]
        assert ids == sorted(ids)

    def test_missing_ref_text_rejected(self, small_corpus):
        entries, cfg, _ = small_corpus
        entry = ManifestEntry(id="x", noisy_path=entries[0].noisy_path,
                              enhanced_path=entries[0].enhanced_path)
        with pytest.raises(DataError, match="ref_text"):
            evaluate([entry], [], lambda: MockBackend(cfg))

    def test_missing_snr_field_rejected_up_front(self, small_corpus):
        entries, cfg, _ = small_corpus
        stripped = [
            ManifestEntry(id=e.id, noisy_path=e.noisy_path, enhanced_path=e.enhanced_path,
                          ref_text=e.ref_text)
            for e in entries[:2]
        ]
        with pytest.raises(DataError, match="snr_db"):
            evaluate(stripped, ["snr_oa"], lambda: MockBackend(cfg))

    def test_backend_failures_counted_and_excluded(self, small_corpus):
        entries, cfg, _ = small_corpus

        class Poisoned(MockBackend):
            def transcribe(self, w, want=WANT):
                if getattr(self, "trip", False):
                    self.trip = False
                    raise BackendError("synthetic outage")
                return super().transcribe(w, want)

        # fail exactly the first decode: that utterance drops out, rest survive
        backend = Poisoned(cfg)
        backend.trip = True
        report = evaluate(entries[:4], [], lambda: backend, workers=1)
        assert report.metadata["failures"] == "1"
        assert report.rows[0].n_utts == 3

    def test_mean_s_prime_reported(self, small_corpus):
        entries, cfg, _ = small_corpus
        report = evaluate(entries[:4], ["conf_oa"], lambda: MockBackend(cfg))
        row = {r.method: r for r in report.rows}["conf_oa"]
        per_utt = [u.s_prime for u in row.utterances]
        assert row.mean_s_prime == pytest.approx(float(np.mean(per_utt)), abs=1e-12)

    def test_empty_reference_flagged_but_aggregated(self, small_corpus):
        # an empty reference makes the per-utterance rate undefined (inf),
        # while the corpus rate counts its insertions against one token
        import math

        entries, cfg, _ = small_corpus
        blanked = [
            ManifestEntry(id=e.id, noisy_path=e.noisy_path, enhanced_path=e.enhanced_path,
                          ref_text="" if i == 0 else e.ref_text)
            for i, e in enumerate(entries[:3])
        ]
        report = evaluate(blanked, [], lambda: MockBackend(cfg))
        noisy = report.rows[0]
        flagged = [u for u in noisy.utterances if u.ref_len == 0]
        assert len(flagged) == 1
        assert flagged[0].errors > 0 and math.isinf(flagged[0].wer)
        assert math.isfinite(noisy.corpus_wer)


class TestClassifyCalibration:
    def test_equal_wer_is_ambiguous_regardless_of_confidence(self):
        from oafuse.harness import classify_calibration

        assert classify_calibration(0.1, 0.1, 0.9, 0.2) == "ambiguous"

    def test_worse_signal_with_lower_confidence_is_correct(self):
        from oafuse.harness import classify_calibration

        assert classify_calibration(0.3, 0.1, 0.4, 0.9) == "confidence_correct"

    def test_worse_signal_with_higher_confidence_is_miscalibrated(self):
        from oafuse.harness import classify_calibration

        assert classify_calibration(0.3, 0.1, 0.9, 0.4) == "miscalibrated"

    def test_equal_confidence_with_unequal_wer_is_miscalibrated(self):
        from oafuse.harness import classify_calibration

        assert classify_calibration(0.3, 0.1, 0.5, 0.5) == "miscalibrated"
        assert classify_calibration(0.1, 0.3, 0.5, 0.5) == "miscalibrated"


class TestGroupAnalysis:
    def test_cells_partition_corpus(self, small_corpus):
        entries, cfg, _ = small_corpus
        analysis = group_analysis(entries, lambda: MockBackend(cfg), workers=2)
        assert sum(c.count for c in analysis.cells) == analysis.corpus_size == len(entries)
        for group in ("confidence_correct", "miscalibrated", "ambiguous"):
            cells = [c for c in analysis.cells if c.group == group]
            total = sum(c.count for c in cells)
            share = sum(c.share for c in cells)
            if total:
                assert share == pytest.approx(1.0, abs=1e-9)
            else:
                assert share == 0.0

    def test_switch_output_wer_comes_from_chosen_signal(self, small_corpus):
        entries, cfg, _ = small_corpus
        backend = MockBackend(cfg)
        for entry in entries[:4]:
            ctx = _ctx(entry, backend)
            outcome = run_strategy(ctx, "conf_switch")
            expected = ctx.stats_y if ctx.conf_y >= ctx.conf_x else ctx.stats_x
            assert outcome.stats == expected

    def test_requires_ref_text(self, small_corpus):
        entries, cfg, _ = small_corpus
        entry = ManifestEntry(id="x", noisy_path=entries[0].noisy_path,
                              enhanced_path=entries[0].enhanced_path)
        with pytest.raises(DataError, match="ref_text"):
            group_analysis([entry], lambda: MockBackend(cfg))


class TestSynthCorpus:
    def test_deterministic_trees(self, tmp_path):
        kwargs = dict(n_utts=2, words_per_utt=3, vocab_size=4, snr_grid=[0.0],
                      residual_noise=0.1, artifact_drop_prob=0.2, seed=11)
        m1 = synth_corpus(out_dir=tmp_path / "a", **kwargs)
        m2 = synth_corpus(out_dir=tmp_path / "b", **kwargs)
        files1 = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_noiseless_artifact_free_corpus_is_perfect(self, tmp_path):
        manifest = synth_corpus(
            n_utts=3, words_per_utt=4, vocab_size=6, snr_grid=[60.0],
            residual_noise=0.0, artifact_drop_prob=0.0, seed=5, out_dir=tmp_path,
        )
        cfg = ToneConfig.from_file(tmp_path / "tone_config.json")
        report = evaluate(load_manifest(manifest), [], lambda: MockBackend(cfg))
        assert report.rows[0].corpus_wer == 0.0  # noisy
        assert report.rows[1].corpus_wer == 0.0  # enhanced

    def test_full_drop_deletes_everything(self, tmp_path):
        manifest = synth_corpus(
            n_utts=3, words_per_utt=4, vocab_size=6, snr_grid=[60.0],
            residual_noise=0.0, artifact_drop_prob=1.0, seed=5, out_dir=tmp_path,
        )
        cfg = ToneConfig.from_file(tmp_path / "tone_config.json")
        report = evaluate(load_manifest(manifest), [], lambda: MockBackend(cfg))
        assert report.rows[1].corpus_wer == pytest.approx(1.0)  # all deletions

    def test_manifest_loads_and_references_existing_wavs(self, small_corpus):
        entries, _, out = small_corpus
        for e in entries:
            assert e.noisy_path.exists() and e.enhanced_path.exists()
            assert e.snr_db is not None and e.ref_text


class TestReportRendering:
    def test_emitting_twice_is_byte_identical(self, small_corpus, tmp_path):
        entries, cfg, _ = small_corpus
        from oafuse.report import emit_report

        report = evaluate(entries[:4], ["conf_oa"], lambda: MockBackend(cfg), seed=7)
        emit_report(report, "tsv", tmp_path / "r1.tsv")
        emit_report(report, "tsv", tmp_path / "r2.tsv")
        assert (tmp_path / "r1.tsv").read_bytes() == (tmp_path / "r2.tsv").read_bytes()

    def test_json_round_trips_structurally(self, small_corpus):
        entries, cfg, _ = small_corpus
        report = evaluate(entries[:4], ["conf_oa"], lambda: MockBackend(cfg), seed=7)
        text = render_report(report, "json")
        parsed = json.loads(text)
        assert parsed["metadata"] == report.metadata
        assert [r["method"] for r in parsed["rows"]] == [r.method for r in report.rows]
        assert parsed["rows"][2]["utterances"][0]["wer"] == report.rows[2].utterances[0].wer

    def test_empty_report_renders_header_only(self):
        empty = EvalReport(rows=(), metadata={"backend": "mock"})
        text = render_report(empty, "tsv")
        lines = text.splitlines()
        assert lines[-1].startswith("method\t")

    def test_group_tsv_has_nine_cells(self, small_corpus):
        entries, cfg, _ = small_corpus
        analysis = group_analysis(entries[:6], lambda: MockBackend(cfg))
        text = render_report(analysis, "tsv")
        data_rows = [l for l in text.splitlines() if l and not l.startswith(("#", "group\t"))]
        assert len(data_rows) == 9

    def test_unknown_format_rejected(self, small_corpus):
        with pytest.raises(ValueError, match="format"):
            render_report(EvalReport(rows=(), metadata={}), "xml")
