import json

import pytest

from oafuse.errors import DataError
from oafuse.manifest import load_manifest


def _write(tmp_path, lines):
    p = tmp_path / "manifest.jsonl"
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def _entry(i=0, **overrides):
    obj = {"id": f"utt{i}", "noisy_path": f"n{i}.wav", "enhanced_path": f"e{i}.wav"}
    obj.update(overrides)
    return json.dumps(obj)


class TestLoadManifest:
    def test_two_valid_lines(self, tmp_path):
        entries = load_manifest(_write(tmp_path, [_entry(0), _entry(1)]))
        assert [e.id for e in entries] == ["utt0", "utt1"]

    def test_duplicate_id_names_offender(self, tmp_path):
        with pytest.raises(DataError, match="duplicate id 'utt0'"):
            load_manifest(_write(tmp_path, [_entry(0), _entry(0)]))

    def test_missing_required_field(self, tmp_path):
        bad = json.dumps({"id": "a", "enhanced_path": "e.wav"})
        with pytest.raises(DataError, match="line 1.*noisy_path"):
            load_manifest(_write(tmp_path, [bad]))

    def test_malformed_line_reports_line_number(self, tmp_path):
        with pytest.raises(DataError, match="line 2.*invalid JSON"):
            load_manifest(_write(tmp_path, [_entry(0), "{not json"]))

    def test_unknown_field_rejected(self, tmp_path):
        with pytest.raises(DataError, match="unknown fields.*'snr'"):
            load_manifest(_write(tmp_path, [_entry(0, snr=5)]))

    def test_relative_paths_resolve_against_manifest_dir(self, tmp_path):
        entries = load_manifest(_write(tmp_path, [_entry(0)]))
        assert entries[0].noisy_path == tmp_path / "n0.wav"

    def test_absolute_paths_kept(self, tmp_path):
        line = _entry(0, noisy_path="/abs/n.wav")
        entries = load_manifest(_write(tmp_path, [line]))
        assert str(entries[0].noisy_path) == "/abs/n.wav"

    def test_optional_fields_parsed(self, tmp_path):
        line = _entry(
            0, ref_text="alfa bravo", snr_db=5, dnsmos_bak=3.5, dnsmos_sig=4.0,
            classifier_posteriors=[0.2, 0.3, 0.5],
        )
        e = load_manifest(_write(tmp_path, [line]))[0]
        assert e.ref_text == "alfa bravo"
        assert e.snr_db == 5.0
        assert e.classifier_posteriors == (0.2, 0.3, 0.5)

    def test_bad_classifier_posteriors(self, tmp_path):
        with pytest.raises(DataError, match="classifier_posteriors"):
            load_manifest(_write(tmp_path, [_entry(0, classifier_posteriors=[0.5])]))

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "manifest.jsonl"
        p.write_text(_entry(0) + "\n\n" + _entry(1) + "\n")
        assert len(load_manifest(p)) == 2

    def test_non_numeric_snr_rejected(self, tmp_path):
        with pytest.raises(DataError, match="snr_db"):
            load_manifest(_write(tmp_path, [_entry(0, snr_db="loud")]))
