"""Opening-marker position pruning.

Teacher-forces the template under marked and unmarked conditioning, takes
per-token log-prob deltas, and thresholds them into the set of gaps where
an opening marker may be emitted during search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .scorer import Scorer
from .types import Template, TokenSeq


@dataclass(frozen=True)
class DeltaProfile:
    """Per-token |log-prob difference| between the two conditionings.

    deltas[i-1] corresponds to generating the i-th template token (1-based).
    """

    deltas: tuple[float, ...]

    def __post_init__(self):
        if any(d < 0 for d in self.deltas):
            raise ValueError("deltas must be non-negative")

    @property
    def n(self) -> int:
        return len(self.deltas)


@dataclass(frozen=True)
class PruneConfig:
    alpha1: float = 0.5
    alpha2: float = 0.1
    sigma: int = 5
    enabled: bool = True

    def __post_init__(self):
        if self.alpha2 >= self.alpha1:
            raise ValueError("alpha2 must be < alpha1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class OpenGapSet:
    """Gaps eligible to host the opening marker."""

    gaps: frozenset[int]
    fallback_used: bool = False

    @classmethod
    def all_gaps(cls, n: int, fallback_used: bool = False) -> "OpenGapSet":
        # gap n can only start an empty span and is never admitted
        return cls(gaps=frozenset(range(n)), fallback_used=fallback_used)


def compute_deltas(scorer: Scorer, template: Template,
                   source_plain: TokenSeq, source_marked: TokenSeq,
                   prefix_id: int) -> DeltaProfile:
    """Teacher-forced per-token log-prob gap along the template."""
    tokens = template.tokens
    requests_marked = []
    requests_plain = []
    for i in range(len(tokens)):
        prefix = (prefix_id,) + tokens[:i]
        requests_marked.append((source_marked, prefix, [tokens[i]]))
        requests_plain.append((source_plain, prefix, [tokens[i]]))
    marked = scorer.next_token_logprobs_batch(requests_marked)
    plain = scorer.next_token_logprobs_batch(requests_plain)
    deltas = tuple(abs(m[0] - p[0]) for m, p in zip(marked, plain))
    return DeltaProfile(deltas=deltas)


def candidate_open_gaps(profile: DeltaProfile,
                        cfg: PruneConfig) -> OpenGapSet:
    """Threshold the delta profile into opening-marker gaps.

    Token index i (1-based) maps to gap i-1, the gap immediately before the
    token whose probability was perturbed. If no position clears the primary
    threshold, all gaps are admitted rather than silently dropping the
    example.
    """
    n = profile.n
    if not cfg.enabled:
        return OpenGapSet.all_gaps(n)
    m1 = {i for i in range(1, n + 1) if profile.deltas[i - 1] > cfg.alpha1}
    if not m1:
        return OpenGapSet.all_gaps(n, fallback_used=True)
    m2 = {i for i in range(1, n + 1)
          if profile.deltas[i - 1] > cfg.alpha2
          and any(abs(i - j) <= cfg.sigma for j in m1)}
    return OpenGapSet(gaps=frozenset(i - 1 for i in m1 | m2))
