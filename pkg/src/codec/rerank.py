"""Hypothesis re-ranking by reverse span scores, plus train-mode filtering.

The top-k hypotheses are ordered by total log-prob; the winner is then the
best reverse-direction span score among the hypotheses whose projected
span equals, or is a contiguous token subsequence of, the current top-1's
span. Train-mode filtering additionally drops examples whose winning span
fails both a lexical and a span log-prob threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf

from .scorer import Scorer, sequence_logprob
from .types import Hypothesis, TokenSeq, Vocabulary


@dataclass(frozen=True)
class ScoredCandidate:
    hypothesis: Hypothesis
    hyp_score: float
    span_tokens: TokenSeq
    span_score: float = -inf
    lexical_score: float | None = None


@dataclass(frozen=True)
class FilterConfig:
    lexical_threshold: float = 0.5
    span_logprob_threshold: float = -5.0
    enabled: bool = False

    def __post_init__(self):
        if not 0.0 <= self.lexical_threshold <= 1.0:
            raise ValueError("lexical_threshold must be in [0, 1]")


def extract_span(vocab: Vocabulary, hyp: Hypothesis) -> TokenSeq:
    """Tokens strictly between the markers of a completed hypothesis."""
    o = hyp.tokens.index(vocab.open_id)
    c = hyp.tokens.index(vocab.close_id)
    return hyp.tokens[o + 1:c]


def span_score(scorer: Scorer, vocab: Vocabulary, e_src: TokenSeq,
               e_tgt: TokenSeq) -> float:
    """Reverse log-prob of regenerating the source span from the projected
    span: the target span conditions, the source span is generated."""
    if not e_tgt:
        return -inf
    framed = (vocab.prefix_id,) + tuple(e_src) + (vocab.eos_id,)
    return sequence_logprob(scorer, tuple(e_tgt), framed)


def _is_contiguous_subsequence(needle: TokenSeq, haystack: TokenSeq) -> bool:
    if len(needle) > len(haystack):
        return False
    return any(haystack[i:i + len(needle)] == tuple(needle)
               for i in range(len(haystack) - len(needle) + 1))


def rerank(candidates: list[ScoredCandidate]) -> ScoredCandidate:
    """Pick the best candidate by span score within the top-1's span family.

    Candidates are (re)sorted by hyp_score descending (stable); only the
    top-1 and candidates whose span is a contiguous subsequence of the
    top-1's span compete; ties revert to hyp_score order.
    """
    if not candidates:
        raise ValueError("rerank requires at least one candidate")
    ordered = sorted(candidates, key=lambda c: -c.hyp_score)
    top = ordered[0]
    family = [c for c in ordered
              if c is top
              or _is_contiguous_subsequence(c.span_tokens, top.span_tokens)]
    return max(family, key=lambda c: c.span_score)


def _fold(s: str) -> str:
    return " ".join(s.casefold().split())


def _levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[-1] + 1,
                           prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def lexical_span_score(a: str, b: str) -> float:
    """Normalized edit-distance similarity in [0, 1] after case folding and
    whitespace normalization. Two empty strings score 1.0."""
    fa, fb = _fold(a), _fold(b)
    longest = max(len(fa), len(fb))
    if longest == 0:
        return 1.0
    return 1.0 - _levenshtein(fa, fb) / longest


def filter_example(candidate: ScoredCandidate, cfg: FilterConfig) -> bool:
    """True to keep. An example is dropped only when both the lexical score
    and the span score fall strictly below their thresholds."""
    lexical = candidate.lexical_score
    if lexical is None:
        return True
    return not (lexical < cfg.lexical_threshold
                and candidate.span_score < cfg.span_logprob_threshold)
