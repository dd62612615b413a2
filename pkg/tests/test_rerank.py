import math
from math import inf

import pytest
from hypothesis import given, strategies as st

from codec import (
    FilterConfig,
    Hypothesis,
    LabeledSpan,
    Placement,
    PlantedAlignmentScorer,
    ScoredCandidate,
    extract_span,
    filter_example,
    insert_markers,
    lexical_span_score,
    make_planted_vocab,
    rerank,
    span_score,
)


def cand(hyp_score, span, span_sc=-inf, lexical=None):
    return ScoredCandidate(hypothesis=None, hyp_score=hyp_score,
                           span_tokens=tuple(span), span_score=span_sc,
                           lexical_score=lexical)


class TestExtractSpan:
    def test_between_markers(self, small_vocab):
        h = Hypothesis(tokens=(2, 4, 0, 5, 6, 1, 7, 3),
                       trace=tuple(-float(i) for i in range(8)),
                       placement=Placement(1, 3))
        assert extract_span(small_vocab, h) == (5, 6)

    def test_empty_span(self, small_vocab):
        h = Hypothesis(tokens=(2, 4, 0, 1, 3),
                       trace=(0.0, -1.0, -2.0, -3.0, -4.0),
                       placement=Placement(1, 1))
        assert extract_span(small_vocab, h) == ()


class TestSpanScore:
    def test_empty_target_is_minus_inf(self, small_vocab):
        scorer = None
        assert span_score(scorer, small_vocab, (4, 5), ()) == -inf

    def test_gold_span_outscores_wider_span(self):
        vocab = make_planted_vocab(8)
        scorer = PlantedAlignmentScorer(vocab, 8, seed=1)
        e_src = (5, 6)            # s1 s2
        gold_tgt = (13, 14)       # t1 t2
        wider_tgt = (13, 14, 15)  # t1 t2 t3
        assert span_score(scorer, vocab, e_src, gold_tgt) > \
            span_score(scorer, vocab, e_src, wider_tgt)

    def test_matches_manual_chain(self):
        vocab = make_planted_vocab(8)
        scorer = PlantedAlignmentScorer(vocab, 8, seed=1)
        e_src, e_tgt = (5,), (13,)
        framed = (vocab.prefix_id, 5, vocab.eos_id)
        manual = 0.0
        for i in range(1, len(framed)):
            (lp,) = scorer.next_token_logprobs(e_tgt, framed[:i],
                                               [framed[i]])
            manual += lp
        assert span_score(scorer, vocab, e_src, e_tgt) == \
            pytest.approx(manual, abs=1e-12)


class TestRerank:
    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            rerank([])

    def test_single_candidate_wins(self):
        c = cand(-1.0, (5,), span_sc=-2.0)
        assert rerank([c]) is c

    def test_subspan_with_better_span_score_wins(self):
        top = cand(-1.0, (5, 6, 7), span_sc=-4.0)
        sub = cand(-2.0, (6, 7), span_sc=-1.0)
        assert rerank([top, sub]) is sub

    def test_non_subsequence_cannot_win(self):
        top = cand(-1.0, (5, 6), span_sc=-9.0)
        other = cand(-2.0, (7, 8), span_sc=-0.1)
        assert rerank([top, other]) is top

    def test_gappy_subsequence_is_excluded(self):
        top = cand(-1.0, (5, 6, 7), span_sc=-9.0)
        gappy = cand(-2.0, (5, 7), span_sc=-0.1)
        assert rerank([top, gappy]) is top

    def test_ties_revert_to_hyp_order(self):
        top = cand(-1.0, (5, 6), span_sc=-3.0)
        sub = cand(-2.0, (5,), span_sc=-3.0)
        assert rerank([top, sub]) is top

    def test_candidates_are_sorted_first(self):
        best = cand(-1.0, (5, 6), span_sc=-5.0)
        worse = cand(-3.0, (9,), span_sc=-0.1)
        # worse is listed first but is not in best's span family
        assert rerank([worse, best]) is best

    def test_identical_span_competes(self):
        top = cand(-1.0, (5, 6), span_sc=-4.0)
        same = cand(-2.0, (5, 6), span_sc=-4.0)
        assert rerank([top, same]) is top


class TestLexicalScore:
    def test_one_edit_of_seven(self):
        got = lexical_span_score("faransi", "faranse")
        assert got == pytest.approx(1.0 - 1.0 / 7.0)

    def test_identical_strings(self):
        assert lexical_span_score("Paris", "Paris") == 1.0

    def test_case_folding(self):
        assert lexical_span_score("PARIS", "paris") == 1.0

    def test_whitespace_normalization(self):
        assert lexical_span_score("new   york", "New York") == 1.0

    def test_disjoint_strings(self):
        assert lexical_span_score("abc", "xyz") == 0.0

    def test_both_empty(self):
        assert lexical_span_score("", "") == 1.0

    def test_one_empty(self):
        assert lexical_span_score("abc", "") == 0.0

    @given(a=st.text(max_size=12), b=st.text(max_size=12))
    def test_bounded_and_symmetric(self, a, b):
        got = lexical_span_score(a, b)
        assert 0.0 <= got <= 1.0
        assert got == lexical_span_score(b, a)


class TestFilter:
    def test_keeps_when_lexical_high(self):
        c = cand(-1.0, (5,), span_sc=-20.0, lexical=0.9)
        assert filter_example(c, FilterConfig(enabled=True))

    def test_keeps_when_span_score_high(self):
        c = cand(-1.0, (5,), span_sc=-1.0, lexical=0.1)
        assert filter_example(c, FilterConfig(enabled=True))

    def test_drops_when_both_low(self):
        c = cand(-1.0, (5,), span_sc=-20.0, lexical=0.1)
        assert not filter_example(c, FilterConfig(enabled=True))

    def test_thresholds_are_strict(self):
        at_lex = cand(-1.0, (5,), span_sc=-20.0, lexical=0.5)
        assert filter_example(at_lex, FilterConfig(enabled=True))
        at_span = cand(-1.0, (5,), span_sc=-5.0, lexical=0.1)
        assert filter_example(at_span, FilterConfig(enabled=True))

    def test_missing_lexical_keeps(self):
        c = cand(-1.0, (5,), span_sc=-20.0, lexical=None)
        assert filter_example(c, FilterConfig(enabled=True))

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            FilterConfig(lexical_threshold=1.5)
