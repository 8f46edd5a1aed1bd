import itertools
import math

import numpy as np
import pytest

from oafuse.metrics import (
    EditStats,
    classifier_label_2class,
    classifier_label_3class,
    corpus_wer,
    edit_distance,
    normalize_text,
    wer,
)


def _lev_recursive(a, b, memo=None):
    """Plain recurrence oracle, memoized on suffix indices only."""
    if memo is None:
        memo = {}
    key = (len(a), len(b))
    if key in memo:
        return memo[key]
    if not a:
        d = len(b)
    elif not b:
        d = len(a)
    else:
        d = min(
            _lev_recursive(a[1:], b[1:], memo) + (a[0] != b[0]),
            _lev_recursive(a[1:], b, memo) + 1,
            _lev_recursive(a, b[1:], memo) + 1,
        )
    memo[key] = d
    return d


class TestNormalizeText:
    def test_basic_strips_punctuation(self):
        assert normalize_text("The cat, sat.") == ["the", "cat", "sat"]

    def test_keeps_intra_word_apostrophe(self):
        assert normalize_text("don't stop") == ["don't", "stop"]

    def test_empty(self):
        assert normalize_text("") == []

    def test_drops_boundary_apostrophes(self):
        assert normalize_text("'quoted' words") == ["quoted", "words"]

    def test_collapses_whitespace(self):
        assert normalize_text("  a\t b\n\nc ") == ["a", "b", "c"]

    def test_none_policy_splits_only(self):
        assert normalize_text("The CAT, sat.", policy="none") == ["The", "CAT,", "sat."]

    def test_unknown_policy(self):
        with pytest.raises(ValueError, match="policy"):
            normalize_text("x", policy="fancy")


class TestEditDistance:
    def test_single_substitution(self):
        st = edit_distance(["a", "b", "c"], ["a", "x", "c"])
        assert (st.substitutions, st.deletions, st.insertions) == (1, 0, 0)

    def test_single_deletion(self):
        st = edit_distance(["a"], [])
        assert (st.substitutions, st.deletions, st.insertions) == (0, 1, 0)

    def test_two_deletions(self):
        ref = "the cat sat on the mat".split()
        hyp = "the cat sat mat".split()
        assert edit_distance(ref, hyp).total == 2

    def test_identity_is_all_zero(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            seq = [str(s) for s in rng.integers(0, 3, rng.integers(0, 8))]
            st = edit_distance(seq, seq)
            assert (st.substitutions, st.deletions, st.insertions) == (0, 0, 0)
            assert st.ref_len == len(seq)

    def test_swap_symmetry(self):
        rng = np.random.default_rng(32)
        for _ in range(200):
            a = [str(s) for s in rng.integers(0, 3, rng.integers(0, 7))]
            b = [str(s) for s in rng.integers(0, 3, rng.integers(0, 7))]
            fwd, rev = edit_distance(a, b), edit_distance(b, a)
            assert fwd.total == rev.total
            assert fwd.substitutions == rev.substitutions
            assert fwd.deletions == rev.insertions
            assert fwd.insertions == rev.deletions

    def test_triangle_inequality(self):
        rng = np.random.default_rng(33)
        for _ in range(200):
            a, b, c = (
                [str(s) for s in rng.integers(0, 3, rng.integers(0, 6))] for _ in range(3)
            )
            assert edit_distance(a, c).total <= edit_distance(a, b).total + edit_distance(b, c).total

    def test_matches_recursive_oracle_sampled(self):
        rng = np.random.default_rng(34)
        for _ in range(300):
            a = tuple(str(s) for s in rng.integers(0, 3, rng.integers(0, 7)))
            b = tuple(str(s) for s in rng.integers(0, 3, rng.integers(0, 7)))
            assert edit_distance(a, b).total == _lev_recursive(a, b)

    def test_decomposition_is_deterministic(self):
        a, b = ["a", "b", "c", "d"], ["b", "c", "d", "e"]
        first = edit_distance(a, b)
        for _ in range(5):
            assert edit_distance(a, b) == first

    def test_stats_validation(self):
        with pytest.raises(ValueError):
            EditStats(2, 2, 0, 3)  # S + D exceeds ref_len
        with pytest.raises(ValueError):
            EditStats(-1, 0, 0, 3)


class TestWer:
    def test_third(self):
        assert wer(EditStats(1, 0, 0, 3)) == pytest.approx(1 / 3)

    def test_perfect(self):
        assert wer(EditStats(0, 0, 0, 5)) == 0.0

    def test_can_exceed_one(self):
        assert wer(EditStats(0, 0, 4, 3)) == pytest.approx(4 / 3)

    def test_empty_ref_empty_hyp(self):
        assert wer(EditStats(0, 0, 0, 0)) == 0.0

    def test_empty_ref_nonempty_hyp_is_undefined(self):
        assert math.isinf(wer(EditStats(0, 0, 2, 0)))

    def test_corpus_pools_errors_over_tokens(self):
        stats = [EditStats(1, 0, 0, 4), EditStats(0, 1, 1, 6)]
        assert corpus_wer(stats) == pytest.approx(3 / 10)

    def test_corpus_counts_empty_ref_as_one_token(self):
        stats = [EditStats(0, 0, 2, 0), EditStats(0, 0, 0, 9)]
        assert corpus_wer(stats) == pytest.approx(2 / 10)

    def test_corpus_empty(self):
        assert corpus_wer([]) == 0.0


class TestClassifierLabels:
    def test_two_class(self):
        assert classifier_label_2class(1, 3) == 0
        assert classifier_label_2class(3, 1) == 1
        assert classifier_label_2class(2, 2) == 1  # tie goes to class 1

    def test_three_class(self):
        assert classifier_label_3class(1, 3) == 0
        assert classifier_label_3class(3, 1) == 1
        assert classifier_label_3class(2, 2) == 2

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            classifier_label_2class(-1, 0)

    def test_compatible_except_on_ties(self):
        for d_noisy, d_enh in itertools.product(range(4), range(4)):
            two = classifier_label_2class(d_noisy, d_enh)
            three = classifier_label_3class(d_noisy, d_enh)
            if d_noisy == d_enh:
                assert (two, three) == (1, 2)
            else:
                assert two == three
