"""Evaluation report structures and their stable TSV/JSON renderings.

Renderings are pure functions of the report, so emitting the same report
twice produces byte-identical files. WER columns print as percentages with
two decimals, weights with four.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

PathLike = Union[str, Path]

GROUPS = ("confidence_correct", "miscalibrated", "ambiguous")
SUBGROUPS = ("oa_win", "switch_win", "tie")


@dataclass(frozen=True)
class UttResult:
    """One method's outcome on one utterance."""

    utt_id: str
    errors: int
    ref_len: int
    wer: float
    s_prime: float | None  # None for the raw-signal baselines


@dataclass(frozen=True)
class MethodRow:
    method: str
    n_utts: int
    corpus_wer: float
    mean_s_prime: float | None
    utterances: tuple[UttResult, ...]


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[MethodRow, ...]
    metadata: dict


@dataclass(frozen=True)
class GroupCell:
    group: str
    subgroup: str
    count: int
    share: float  # fraction of the cell's group; 0.0 when the group is empty
    wer_noisy: float | None
    wer_enhanced: float | None
    wer_switch: float | None
    wer_oa: float | None


@dataclass(frozen=True)
class GroupAnalysis:
    cells: tuple[GroupCell, ...]  # all 9 group x subgroup cells, fixed order
    corpus_size: int
    metadata: dict


def _fmt_wer(value: float | None) -> str:
    if value is None:
        return "-"
    if math.isinf(value):
        return "inf"
    return f"{100.0 * value:.2f}"


def _fmt_weight(value: float | None) -> str:
    return "-" if value is None else f"{value:.4f}"


def _metadata_lines(metadata: dict) -> list[str]:
    lines = []
    for key in sorted(metadata):
        value = metadata[key]
        lines.append(f"# {key}\t{'-' if value is None else value}")
    return lines


def render_eval_tsv(report: EvalReport) -> str:
    lines = ["# oafuse-eval-report\tv1"]
    lines += _metadata_lines(report.metadata)
    lines.append("method\tn_utts\tcorpus_wer_pct\tmean_s_prime")
    for row in report.rows:
        lines.append(
            f"{row.method}\t{row.n_utts}\t{_fmt_wer(row.corpus_wer)}\t{_fmt_weight(row.mean_s_prime)}"
        )
    return "\n".join(lines) + "\n"


def eval_report_to_obj(report: EvalReport) -> dict:
    return {
        "metadata": dict(report.metadata),
        "rows": [
            {
                "method": row.method,
                "n_utts": row.n_utts,
                "corpus_wer": row.corpus_wer,
                "mean_s_prime": row.mean_s_prime,
                "utterances": [
                    {
                        "id": u.utt_id,
                        "errors": u.errors,
                        "ref_len": u.ref_len,
                        "wer": u.wer,
                        "s_prime": u.s_prime,
                    }
                    for u in row.utterances
                ],
            }
            for row in report.rows
        ],
    }


def render_group_tsv(analysis: GroupAnalysis) -> str:
    lines = ["# oafuse-group-analysis\tv1"]
    lines += _metadata_lines(analysis.metadata)
    lines.append(f"# corpus_size\t{analysis.corpus_size}")
    lines.append(
        "group\tsubgroup\tcount\tshare\twer_noisy_pct\twer_enhanced_pct\twer_switch_pct\twer_oa_pct"
    )
    for c in analysis.cells:
        lines.append(
            "\t".join(
                [
                    c.group,
                    c.subgroup,
                    str(c.count),
                    f"{c.share:.4f}",
                    _fmt_wer(c.wer_noisy),
                    _fmt_wer(c.wer_enhanced),
                    _fmt_wer(c.wer_switch),
                    _fmt_wer(c.wer_oa),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def group_analysis_to_obj(analysis: GroupAnalysis) -> dict:
    return {
        "metadata": dict(analysis.metadata),
        "corpus_size": analysis.corpus_size,
        "cells": [
            {
                "group": c.group,
                "subgroup": c.subgroup,
                "count": c.count,
                "share": c.share,
                "wer_noisy": c.wer_noisy,
                "wer_enhanced": c.wer_enhanced,
                "wer_switch": c.wer_switch,
                "wer_oa": c.wer_oa,
            }
            for c in analysis.cells
        ],
    }


def render_report(report, fmt: str) -> str:
    """Render either report type to the requested format."""
    if fmt == "tsv":
        if isinstance(report, EvalReport):
            return render_eval_tsv(report)
        return render_group_tsv(report)
    if fmt == "json":
        obj = eval_report_to_obj(report) if isinstance(report, EvalReport) else group_analysis_to_obj(report)
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"
    raise ValueError(f"format must be tsv or json, got {fmt!r}")


def emit_report(report, fmt: str, path: PathLike) -> None:
    text = render_report(report, fmt)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
