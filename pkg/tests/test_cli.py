import json

import pytest

from oafuse.audio import load_wav
from oafuse.cli import main
from oafuse.manifest import load_manifest


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("clicorpus")
    rc = main([
        "synth", "--out-dir", str(out), "--n-utts", "6", "--words-per-utt", "4",
        "--vocab-size", "6", "--snr-grid", "0,10", "--residual-noise", "0.1",
        "--artifact-drop-prob", "0.3", "--seed", "3",
    ])
    assert rc == 0
    return out


class TestSynthCommand:
    def test_writes_manifest_and_config(self, corpus_dir):
        assert (corpus_dir / "manifest.jsonl").exists()
        assert (corpus_dir / "tone_config.json").exists()
        entries = load_manifest(corpus_dir / "manifest.jsonl")
        assert len(entries) == 6


class TestEvalCommand:
    def test_tsv_report(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "report.tsv"
        rc = main([
            "eval", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--strategies", "wer_oracle_oa,conf_oa,conf_switch",
            "--backend", f"mock:{corpus_dir / 'tone_config.json'}",
            "--out", str(out), "--seed", "3",
        ])
        assert rc == 0
        lines = out.read_text().splitlines()
        methods = [l.split("\t")[0] for l in lines if l and not l.startswith("#")][1:]
        assert methods == ["noisy", "enhanced", "wer_oracle_oa", "conf_oa", "conf_switch"]

    def test_stdout_json(self, corpus_dir, capsys):
        rc = main([
            "eval", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--strategies", "conf_oa",
            "--backend", f"mock:{corpus_dir / 'tone_config.json'}",
            "--format", "json",
        ])
        assert rc == 0
        obj = json.loads(capsys.readouterr().out)
        assert {r["method"] for r in obj["rows"]} == {"noisy", "enhanced", "conf_oa"}

    def test_unknown_strategy_is_usage_error(self, corpus_dir):
        with pytest.raises(SystemExit) as exc:
            main([
                "eval", "--manifest", str(corpus_dir / "manifest.jsonl"),
                "--strategies", "magic",
            ])
        assert exc.value.code == 1

    def test_missing_manifest_is_data_error(self, tmp_path):
        rc = main(["eval", "--manifest", str(tmp_path / "nope.jsonl"), "--strategies", "conf_oa"])
        assert rc == 2

    def test_broken_backend_is_backend_error(self, corpus_dir):
        rc = main([
            "eval", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--strategies", "conf_oa", "--backend", "cmd:/no/such/prog",
            "--timeout-ms", "2000",
        ])
        assert rc == 3


class TestAnalyzeCommand:
    def test_nine_cells(self, corpus_dir, capsys):
        rc = main([
            "analyze", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--backend", f"mock:{corpus_dir / 'tone_config.json'}",
        ])
        assert rc == 0
        out = capsys.readouterr().out
        rows = [l for l in out.splitlines() if l and not l.startswith(("#", "group\t"))]
        assert len(rows) == 9


class TestFuseCommand:
    def test_confidence_fusion_writes_wav(self, corpus_dir, tmp_path, capsys):
        entries = load_manifest(corpus_dir / "manifest.jsonl")
        out = tmp_path / "fused.wav"
        rc = main([
            "fuse", "--noisy", str(entries[0].noisy_path),
            "--enhanced", str(entries[0].enhanced_path),
            "--out", str(out), "--strategy", "conf_oa",
            "--backend", f"mock:{corpus_dir / 'tone_config.json'}",
        ])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert 0.0 <= summary["s_prime"] <= 1.0
        fused = load_wav(out)
        noisy = load_wav(entries[0].noisy_path)
        assert len(fused) == len(noisy)

    def test_snr_fusion_needs_no_backend_decode(self, corpus_dir, tmp_path, capsys):
        entries = load_manifest(corpus_dir / "manifest.jsonl")
        out = tmp_path / "fused.wav"
        rc = main([
            "fuse", "--noisy", str(entries[0].noisy_path),
            "--enhanced", str(entries[0].enhanced_path),
            "--out", str(out), "--strategy", "snr_oa", "--snr-db", "10",
            "--snr-min-db", "0", "--snr-max-db", "20",
        ])
        assert rc == 0
        assert json.loads(capsys.readouterr().out)["s_prime"] == pytest.approx(0.5)


class TestTranscribeCommand:
    def test_outputs_json_with_posterior(self, corpus_dir, tmp_path, capsys):
        entries = load_manifest(corpus_dir / "manifest.jsonl")
        post = tmp_path / "p.oapm"
        rc = main([
            "transcribe", "--audio", str(entries[0].noisy_path),
            "--backend", f"mock:{corpus_dir / 'tone_config.json'}",
            "--posterior-out", str(post),
        ])
        assert rc == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["transcript"] == entries[0].ref_text
        assert obj["posterior_path"] == str(post)
        assert post.exists()
        from oafuse.protocol import read_posterior_file

        assert read_posterior_file(post).shape[1] == 7  # 6 words + blank


class TestFrameEvalCommand:
    def test_compares_utterance_and_frame_level(self, corpus_dir, capsys):
        rc = main([
            "frame-eval", "--manifest", str(corpus_dir / "manifest.jsonl"),
            "--backend", f"mock:{corpus_dir / 'tone_config.json'}",
        ])
        assert rc == 0
        out = capsys.readouterr().out
        methods = [l.split("\t")[0] for l in out.splitlines() if l and not l.startswith("#")][1:]
        assert methods == ["noisy", "enhanced", "conf_oa", "frame_conf_oa"]


class TestUsageErrors:
    def test_no_command(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_bad_flag_value(self):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "--manifest", "m", "--strategies", "conf_oa", "--format", "yaml"])
        assert exc.value.code == 1
