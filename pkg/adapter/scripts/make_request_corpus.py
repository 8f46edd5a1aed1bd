"""Write the recorded request corpus to tests/data/requests.jsonl."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from corpusgen import request_lines

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "requests.jsonl"

if __name__ == "__main__":
    OUT.write_text("\n".join(request_lines()) + "\n", encoding="utf-8")
    print(f"wrote {OUT}")
