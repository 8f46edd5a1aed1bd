"""Transcript scoring: text normalization, edit-distance alignment, word
error rate, and the distance-comparison labels used to train external
quality classifiers.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

# strip everything that is not a word character, whitespace, or apostrophe
_PUNCT_RE = re.compile(r"[^\w\s']+")
# apostrophes not flanked by word characters on both sides are punctuation
_LONE_APOSTROPHE_RE = re.compile(r"(?<!\w)'|'(?!\w)")
_UNDERSCORE_RE = re.compile(r"_")


@dataclass(frozen=True)
class EditStats:
    """Error decomposition of one optimal alignment."""

    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    def __post_init__(self):
        if min(self.substitutions, self.deletions, self.insertions, self.ref_len) < 0:
            raise ValueError("edit statistics must be non-negative")
        if self.substitutions + self.deletions > self.ref_len:
            raise ValueError("substitutions + deletions cannot exceed the reference length")

    @property
    def total(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def normalize_text(raw: str, policy: str = "basic") -> list[str]:
    """Tokenize a transcript.

    ``basic``: lowercase, drop punctuation (keeping intra-word apostrophes),
    collapse whitespace, split on whitespace. ``none``: split only.
    """
    if policy == "none":
        return raw.split()
    if policy != "basic":
        raise ValueError(f"unknown normalization policy {policy!r}")
    text = raw.lower()
    text = _PUNCT_RE.sub(" ", text)
    text = _UNDERSCORE_RE.sub(" ", text)
    text = _LONE_APOSTROPHE_RE.sub(" ", text)
    return text.split()


def edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> EditStats:
    """Levenshtein alignment with unit costs.

    The total distance is unique; the S/D/I decomposition follows one fixed
    optimal backtrace (diagonal preferred over insertion over deletion) so
    repeated runs decompose identically.
    """
    n, m = len(ref), len(hyp)
    # distance table, row i = ref prefix length, col j = hyp prefix length
    prev = list(range(m + 1))
    table = [prev]
    for i in range(1, n + 1):
        ri = ref[i - 1]
        row = [i] + [0] * m
        for j in range(1, m + 1):
            diag = prev[j - 1] + (ri != hyp[j - 1])
            ins = row[j - 1] + 1
            dele = prev[j] + 1
            row[j] = diag if diag <= ins and diag <= dele else (ins if ins <= dele else dele)
        table.append(row)
        prev = row

    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        cur = table[i][j]
        if i > 0 and j > 0 and table[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]) == cur:
            if ref[i - 1] != hyp[j - 1]:
                subs += 1
            i, j = i - 1, j - 1
        elif j > 0 and table[i][j - 1] + 1 == cur:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return EditStats(subs, dels, ins, n)


def wer(stats: EditStats) -> float:
    """(S + D + I) / reference length; may exceed 1.

    An empty reference has no defined rate: 0 for an empty hypothesis,
    +inf otherwise (corpus aggregation handles the case separately).
    """
    if stats.ref_len == 0:
        return 0.0 if stats.total == 0 else math.inf
    return stats.total / stats.ref_len


def corpus_wer(stats_list: Sequence[EditStats]) -> float:
    """Pooled rate: total errors over total reference tokens.

    Empty references count one token each so their insertions still weigh
    in instead of dividing by zero.
    """
    total_errors = sum(s.total for s in stats_list)
    total_ref = sum(max(s.ref_len, 1) for s in stats_list)
    if total_ref == 0:
        return 0.0
    return total_errors / total_ref


def classifier_label_2class(d_noisy: float, d_enh: float) -> int:
    """0 when the noisy transcript is strictly closer to the reference,
    otherwise 1 (ties go to 1)."""
    _check_distances(d_noisy, d_enh)
    return 0 if d_noisy < d_enh else 1


def classifier_label_3class(d_noisy: float, d_enh: float) -> int:
    """0 noisy closer, 1 enhanced closer, 2 tie."""
    _check_distances(d_noisy, d_enh)
    if d_noisy < d_enh:
        return 0
    if d_noisy > d_enh:
        return 1
    return 2


def _check_distances(d_noisy: float, d_enh: float) -> None:
    if d_noisy < 0 or d_enh < 0:
        raise ValueError(f"distances must be non-negative, got ({d_noisy}, {d_enh})")
