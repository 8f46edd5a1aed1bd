"""Generate the wire-protocol conformance corpus committed under tests/data.

Each line wraps one valid canonical-form message: {"kind": "request" |
"response", "message": {...}}. The round-trip test re-serializes every
parsed message and demands byte equality.
"""
import json
from pathlib import Path

from oafuse.protocol import canonical_json

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "protocol_corpus.jsonl"


def requests():
    yield {"id": "q1", "op": "transcribe", "audio": {"path": "/tmp/a.wav"},
           "want": ["transcript"]}
    yield {"id": "q2", "op": "transcribe",
           "audio": {"pcm_f32le_b64": "AACAPwAAgL8=", "sample_rate": 16000},
           "want": ["transcript", "token_confidences"]}
    yield {"id": "q3", "op": "transcribe", "audio": {"path": "rel/b.wav"},
           "want": ["transcript", "segments", "token_confidences", "posterior"]}
    yield {"id": "q4", "op": "transcribe",
           "audio": {"pcm_f32le_b64": "", "sample_rate": 8000}, "want": []}
    yield {"id": "q5-unicode", "op": "transcribe", "audio": {"path": "dir/c.wav"},
           "want": ["posterior"]}


def responses():
    yield {"id": "q1", "transcript": "alfa bravo",
           "segments": [{"avg_logprob": -0.105, "num_tokens": 2}],
           "token_confidences": None, "posterior_path": None,
           "class_labels": None, "blank_id": None, "error": None}
    yield {"id": "q2", "transcript": "",
           "segments": [], "token_confidences": None, "posterior_path": None,
           "class_labels": None, "blank_id": None, "error": None}
    yield {"id": "q3", "transcript": "charlie",
           "segments": None, "token_confidences": [0.25, 1.0, 0.0],
           "posterior_path": None, "class_labels": None, "blank_id": None,
           "error": None}
    yield {"id": "q4", "transcript": "delta echo",
           "segments": None, "token_confidences": None,
           "posterior_path": "/tmp/post/p1.oapm",
           "class_labels": ["delta", "echo", "<blank>"], "blank_id": 2,
           "error": None}
    yield {"id": "q5", "transcript": "",
           "segments": None, "token_confidences": None, "posterior_path": None,
           "class_labels": None, "blank_id": None,
           "error": {"code": "timeout", "message": "decoder stalled"}}
    yield {"id": "q6", "transcript": "foxtrot",
           "segments": [{"avg_logprob": 0, "num_tokens": 1},
                        {"avg_logprob": -2.5, "num_tokens": 7}],
           "token_confidences": [0.5], "posterior_path": "p2.oapm",
           "class_labels": [], "blank_id": 0, "error": None}


def main():
    lines = []
    for msg in requests():
        lines.append(canonical_json({"kind": "request", "message": msg}))
    for msg in responses():
        lines.append(canonical_json({"kind": "response", "message": msg}))
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} messages to {OUT}")


if __name__ == "__main__":
    main()
