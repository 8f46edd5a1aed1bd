"""Line-delimited JSON manifests enumerating noisy/enhanced utterance pairs
with optional per-utterance scores for the score-based fusion baselines.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .errors import DataError

PathLike = Union[str, Path]

_REQUIRED = ("id", "noisy_path", "enhanced_path")
_OPTIONAL = ("ref_text", "snr_db", "dnsmos_bak", "dnsmos_sig", "classifier_posteriors")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    noisy_path: Path
    enhanced_path: Path
    ref_text: str | None = None
    snr_db: float | None = None
    dnsmos_bak: float | None = None
    dnsmos_sig: float | None = None
    classifier_posteriors: tuple[float, ...] | None = None


def _parse_entry(obj: dict, line_no: int, base_dir: Path) -> ManifestEntry:
    def fail(msg: str):
        raise DataError(f"manifest line {line_no}: {msg}")

    if not isinstance(obj, dict):
        fail("expected a JSON object")
    unknown = set(obj) - set(_REQUIRED) - set(_OPTIONAL)
    if unknown:
        fail(f"unknown fields {sorted(unknown)}")
    for field in _REQUIRED:
        if field not in obj:
            fail(f"missing required field '{field}'")
        if not isinstance(obj[field], str) or not obj[field]:
            fail(f"field '{field}' must be a non-empty string")

    ref_text = obj.get("ref_text")
    if ref_text is not None and not isinstance(ref_text, str):
        fail("ref_text must be a string")

    numbers = {}
    for field in ("snr_db", "dnsmos_bak", "dnsmos_sig"):
        value = obj.get(field)
        if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
            fail(f"{field} must be a number")
        numbers[field] = None if value is None else float(value)

    posteriors = obj.get("classifier_posteriors")
    if posteriors is not None:
        if (
            not isinstance(posteriors, list)
            or len(posteriors) not in (2, 3)
            or any(isinstance(p, bool) or not isinstance(p, (int, float)) for p in posteriors)
        ):
            fail("classifier_posteriors must be a list of 2 or 3 numbers")
        posteriors = tuple(float(p) for p in posteriors)

    def resolve(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else base_dir / path

    return ManifestEntry(
        id=obj["id"],
        noisy_path=resolve(obj["noisy_path"]),
        enhanced_path=resolve(obj["enhanced_path"]),
        ref_text=ref_text,
        snr_db=numbers["snr_db"],
        dnsmos_bak=numbers["dnsmos_bak"],
        dnsmos_sig=numbers["dnsmos_sig"],
        classifier_posteriors=posteriors,
    )


def load_manifest(path: PathLike) -> list[ManifestEntry]:
    """Parse and validate a manifest; relative audio paths resolve against
    the manifest's own directory."""
    path = Path(path)
    base_dir = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"manifest line {line_no}: invalid JSON: {exc}") from exc
            entry = _parse_entry(obj, line_no, base_dir)
            if entry.id in seen:
                raise DataError(f"manifest line {line_no}: duplicate id '{entry.id}'")
            seen.add(entry.id)
            entries.append(entry)
    return entries
