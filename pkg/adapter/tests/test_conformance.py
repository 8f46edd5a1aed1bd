"""Cross-component conformance: every adapter response must satisfy the
evaluation toolkit's protocol validator, and exported posterior files must
round-trip through its loader unchanged.
"""
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from oafuse.confidence import PosteriorMatrix
from oafuse.protocol import read_posterior_file, validate_response_obj

from corpusgen import build_requests, corpus_audio, materialize_audio, request_lines
from oafuse_adapter.recognizers import StubCtcRecognizer
from oafuse_adapter.wire import decode_inline_audio

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def recorded_lines():
    lines = (DATA / "requests.jsonl").read_text().splitlines()
    assert len(lines) == 20
    # the committed corpus must stay in sync with the generator
    assert lines == request_lines()
    return lines


def _serve_corpus(model: str, run_dir: Path, lines):
    materialize_audio(run_dir)
    post_dir = run_dir / "posteriors"
    proc = subprocess.run(
        [sys.executable, "-m", "oafuse_adapter.cli", "--model", model,
         "--posterior-dir", str(post_dir)],
        input="\n".join(lines) + "\n",
        capture_output=True, text=True, cwd=run_dir, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    responses = [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]
    assert len(responses) == len(lines)
    return responses


class TestRecordedCorpusConformance:
    def test_ctc_model_responses_validate(self, recorded_lines, tmp_path):
        responses = _serve_corpus("stub-ctc", tmp_path, recorded_lines)
        for resp in responses:
            validate_response_obj(resp)
        # requests not wanting segments succeed against the ctc family
        succeeded = [r for r in responses if r["error"] is None]
        assert len(succeeded) >= 10

    def test_seq2seq_model_responses_validate(self, recorded_lines, tmp_path):
        responses = _serve_corpus("stub-seq2seq", tmp_path, recorded_lines)
        for resp in responses:
            validate_response_obj(resp)
        unsupported = [r for r in responses if r["error"] is not None]
        assert all(r["error"]["code"] == "artifact_unsupported" for r in unsupported)

    def test_posterior_files_round_trip(self, recorded_lines, tmp_path):
        responses = _serve_corpus("stub-ctc", tmp_path, recorded_lines)
        by_id = {r["id"]: r for r in responses}
        stub = StubCtcRecognizer()
        checked = 0
        for req in build_requests():
            resp = by_id[req["id"]]
            if resp["error"] is not None or resp["posterior_path"] is None:
                continue
            if "path" in req["audio"]:
                samples = corpus_audio()[req["audio"]["path"]]
                rate = 16000
            else:
                samples, rate = decode_inline_audio(req["audio"])
            expected = stub.decode(samples, rate)

            probs = read_posterior_file(tmp_path / resp["posterior_path"])
            loaded = PosteriorMatrix(probs, blank_id=resp["blank_id"])
            assert loaded.num_frames == expected.posterior.shape[0]
            assert loaded.num_classes == expected.posterior.shape[1]
            assert loaded.blank_id == expected.blank_id
            assert np.array_equal(
                np.argmax(loaded.probs, axis=1), np.argmax(expected.posterior, axis=1)
            )
            checked += 1
        assert checked >= 4
