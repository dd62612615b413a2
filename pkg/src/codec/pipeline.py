"""End-to-end projection of an m-span example.

Decomposes into m single-span problems, runs pruning, search, and
re-ranking per problem, then recombines the winners with overlap handling
and positional label carry-over.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import inf

from .pruning import PruneConfig, candidate_open_gaps, compute_deltas
from .rerank import (
    FilterConfig,
    ScoredCandidate,
    extract_span,
    filter_example,
    lexical_span_score,
    rerank,
    span_score,
)
from .scorer import Scorer
from .search import (
    Diagnostics,
    SearchConfig,
    SearchInput,
    brute_force_topk,
    constrained_dfs,
    csbs_search,
)
from .types import (
    MarkedSource,
    Placement,
    SourceExample,
    Template,
    Vocabulary,
    insert_markers,
)

STATUS_OK = "ok"
STATUS_PARTIAL = "partial"
STATUS_DROPPED_OVERLAP = "dropped_overlap"
STATUS_DROPPED_FILTER = "dropped_filter"
STATUS_DROPPED_UNPROJECTED = "dropped_unprojected"


@dataclass(frozen=True)
class SpanProjection:
    label: str
    placement: Placement | None
    hyp_score: float | None
    span_score: float | None
    lexical_score: float | None = None
    topk: tuple[tuple[Placement, float], ...] = ()


@dataclass(frozen=True)
class ProjectionResult:
    template: Template
    spans: tuple[SpanProjection, ...]
    status: str
    diagnostics: Diagnostics


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "test"  # "train" | "test"
    search: SearchConfig = field(default_factory=SearchConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    rerank_enabled: bool = True
    overlap_policy: str | None = None  # default depends on mode
    engine: str = "dfs"  # "dfs" | "csbs" | "oracle"
    beam_size: int = 16

    def __post_init__(self):
        if self.mode not in ("train", "test"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.engine not in ("dfs", "csbs", "oracle"):
            raise ValueError(f"unknown engine {self.engine!r}")

    @property
    def effective_overlap_policy(self) -> str:
        if self.overlap_policy is not None:
            return self.overlap_policy
        return "drop_example" if self.mode == "train" else "greedy_by_score"


def decompose(vocab: Vocabulary, example: SourceExample) -> list[MarkedSource]:
    """One marked source per labeled span, order preserved."""
    return [insert_markers(vocab, example.tokens, span)
            for span in example.spans]


def _overlaps(a: Placement, b: Placement) -> bool:
    return a.open_gap < b.close_gap and b.open_gap < a.close_gap


def recombine(projections: list[SpanProjection], template: Template,
              cfg: PipelineConfig,
              diagnostics: Diagnostics) -> ProjectionResult:
    policy = cfg.effective_overlap_policy
    any_unprojected = any(p.placement is None for p in projections)

    if policy == "drop_example":
        if any_unprojected:
            status = STATUS_DROPPED_UNPROJECTED
        else:
            placed = [p.placement for p in projections]
            clash = any(_overlaps(a, b)
                        for i, a in enumerate(placed)
                        for b in placed[i + 1:])
            status = STATUS_DROPPED_OVERLAP if clash else STATUS_OK
        return ProjectionResult(template=template, spans=tuple(projections),
                                status=status, diagnostics=diagnostics)

    # greedy_by_score: keep spans in descending hyp_score, drop conflicts
    order = sorted((i for i, p in enumerate(projections)
                    if p.placement is not None),
                   key=lambda i: -projections[i].hyp_score)
    kept: dict[int, SpanProjection] = {}
    dropped_any = False
    for i in order:
        p = projections[i]
        if any(_overlaps(p.placement, q.placement) for q in kept.values()):
            dropped_any = True
        else:
            kept[i] = p
    final = []
    for i, p in enumerate(projections):
        if p.placement is not None and i not in kept:
            p = SpanProjection(label=p.label, placement=None, hyp_score=None,
                               span_score=None, lexical_score=p.lexical_score,
                               topk=p.topk)
        final.append(p)
    status = STATUS_OK if not (dropped_any or any_unprojected) else STATUS_PARTIAL
    return ProjectionResult(template=template, spans=tuple(final),
                            status=status, diagnostics=diagnostics)


def _search_topk(inp: SearchInput, cfg: PipelineConfig, open_gaps,
                 diagnostics: Diagnostics):
    search_cfg = replace(cfg.search, open_gaps=open_gaps)
    if cfg.engine == "dfs":
        hyps, diag = constrained_dfs(inp, search_cfg)
        diagnostics.merge(diag)
        return hyps
    if cfg.engine == "oracle":
        return brute_force_topk(inp, cfg.search.k, open_gaps=open_gaps,
                                allow_empty=cfg.search.allow_empty_spans,
                                diag=diagnostics)
    return csbs_search(inp, cfg.beam_size, open_gaps=open_gaps,
                       allow_empty=cfg.search.allow_empty_spans,
                       diag=diagnostics)[:cfg.search.k]


def project(vocab: Vocabulary, example: SourceExample, template: Template,
            scorer: Scorer, cfg: PipelineConfig,
            span_translations: list[str] | None = None) -> ProjectionResult:
    """Project every labeled span of the example into the template."""
    diagnostics = Diagnostics()
    projections: list[SpanProjection] = []

    for idx, (span, marked) in enumerate(
            zip(example.spans, decompose(vocab, example))):
        open_gaps = None
        if cfg.prune.enabled:
            profile = compute_deltas(scorer, template, example.tokens,
                                     marked.tokens, vocab.prefix_id)
            diagnostics.scorer_calls += 2
            open_gaps = candidate_open_gaps(profile, cfg.prune)

        inp = SearchInput(source_marked=marked, template=template,
                          prefix=vocab.prefix_id, scorer=scorer,
                          vocabulary=vocab)
        hyps = _search_topk(inp, cfg, open_gaps, diagnostics)
        if not hyps:
            projections.append(SpanProjection(
                label=span.label, placement=None, hyp_score=None,
                span_score=None))
            continue

        e_src = example.tokens[span.start:span.end]
        candidates = []
        for hyp in hyps:
            tgt = extract_span(vocab, hyp)
            s_score = (span_score(scorer, vocab, e_src, tgt)
                       if cfg.rerank_enabled else -inf)
            candidates.append(ScoredCandidate(
                hypothesis=hyp, hyp_score=hyp.score, span_tokens=tgt,
                span_score=s_score))
        if cfg.rerank_enabled:
            winner = rerank(candidates)
        else:
            winner = candidates[0]
        win_span_score = winner.span_score
        if not cfg.rerank_enabled and cfg.filter.enabled:
            win_span_score = span_score(scorer, vocab, e_src,
                                        winner.span_tokens)

        lexical = None
        if (cfg.mode == "train" and cfg.filter.enabled
                and span_translations is not None
                and idx < len(span_translations)
                and span_translations[idx] is not None):
            projected_surface = " ".join(vocab.decode(winner.span_tokens))
            lexical = lexical_span_score(span_translations[idx],
                                         projected_surface)

        projections.append(SpanProjection(
            label=span.label, placement=winner.hypothesis.placement,
            hyp_score=winner.hyp_score, span_score=win_span_score,
            lexical_score=lexical,
            topk=tuple((h.placement, h.score) for h in hyps)))

    if cfg.mode == "train" and cfg.filter.enabled:
        for p in projections:
            if p.lexical_score is None or p.placement is None:
                continue
            keep = filter_example(
                ScoredCandidate(hypothesis=None, hyp_score=p.hyp_score,
                                span_tokens=(), span_score=p.span_score,
                                lexical_score=p.lexical_score),
                cfg.filter)
            if not keep:
                return ProjectionResult(
                    template=template, spans=tuple(projections),
                    status=STATUS_DROPPED_FILTER, diagnostics=diagnostics)

    return recombine(projections, template, cfg, diagnostics)
