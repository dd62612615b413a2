"""Constrained depth-first branch-and-bound search for top-k hypotheses.

The decoded frame is PREFIX . (template with one marker pair) . EOS. At
each node at most two candidates are offered: the next template token (or
EOS once the template is exhausted and both markers are placed) and the
next marker. Children are expanded best-first; a child survives only if
its cumulative log-prob is strictly greater than the current lower bound.

Also provides the exhaustive enumeration oracle and the constrained-space
beam search baseline over the identical candidate space.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from math import inf
from time import perf_counter

from .pruning import OpenGapSet
from .scorer import Scorer
from .types import (
    CapacityError,
    Hypothesis,
    MarkedSource,
    Placement,
    Template,
    TokenSeq,
    Vocabulary,
    count_placements,
    iter_placements,
    placement_to_sequence,
)


@dataclass(frozen=True)
class SearchConfig:
    k: int = 5
    delta: float = 5.0
    bound_mode: str = "heuristic"  # "exact" | "heuristic"
    batch_size: int = 16
    open_gaps: OpenGapSet | None = None
    allow_empty_spans: bool = False

    def __post_init__(self):
        if self.k < 1 or self.batch_size < 1 or self.delta < 0:
            raise ValueError("require k >= 1, batch_size >= 1, delta >= 0")
        if self.bound_mode not in ("exact", "heuristic"):
            raise ValueError(f"unknown bound_mode {self.bound_mode!r}")


@dataclass
class Diagnostics:
    nodes_expanded: int = 0
    scorer_calls: int = 0
    bound_pruned: int = 0
    gap_pruned: int = 0
    completed: int = 0
    wall_time: float = 0.0

    def merge(self, other: "Diagnostics") -> None:
        self.nodes_expanded += other.nodes_expanded
        self.scorer_calls += other.scorer_calls
        self.bound_pruned += other.bound_pruned
        self.gap_pruned += other.gap_pruned
        self.completed += other.completed
        self.wall_time += other.wall_time


@dataclass(frozen=True)
class SearchInput:
    source_marked: MarkedSource
    template: Template
    prefix: int
    scorer: Scorer
    vocabulary: Vocabulary


class TopKHeap:
    """Min-heap of at most k completed hypotheses.

    Ties at equal score keep the earlier-completed hypothesis (FIFO).
    """

    def __init__(self, k: int):
        self.k = k
        self._heap: list[tuple[float, int, Hypothesis]] = []
        self._counter = 0

    def push(self, hyp: Hypothesis) -> None:
        self._counter += 1
        heapq.heappush(self._heap, (hyp.score, -self._counter, hyp))
        if len(self._heap) > self.k:
            heapq.heappop(self._heap)

    def __len__(self) -> int:
        return len(self._heap)

    @property
    def full(self) -> bool:
        return len(self._heap) >= self.k

    @property
    def kth_score(self) -> float:
        return self._heap[0][0] if self.full else -inf

    @property
    def kth_hypothesis(self) -> Hypothesis | None:
        return self._heap[0][2] if self.full else None

    def sorted_hypotheses(self) -> list[Hypothesis]:
        ordered = sorted(self._heap, key=lambda e: (-e[0], -e[1]))
        return [e[2] for e in ordered]


def exact_bound(heap: TopKHeap) -> float:
    """Score of the k-th best completed hypothesis, -inf until k exist."""
    return heap.kth_score


def heuristic_bound(heap: TopKHeap, j: int, delta: float,
                    open_id: int) -> float:
    """Length-indexed bound: the k-th hypothesis' trace read at
    d = min(max(j + delta, q), |y^k|), q being its opening-marker position.

    The max(., q) guard keeps a marker-hoarding incumbent (high early
    trace, markers saved for the end) from pruning prematurely.
    """
    yk = heap.kth_hypothesis
    if yk is None:
        return -inf
    trace = yk.trace
    length = len(trace) - 1
    gen = yk.tokens[1:]
    q = gen.index(open_id) + 1 if open_id in gen else 0
    d = length if delta == inf else int(min(max(j + delta, q), length))
    return trace[d]


def batched_expand(requests, scorer: Scorer, batch_size: int):
    """Score up to batch_size partial-hypothesis requests in one scorer
    invocation. Purely a call-aggregation device: outputs are identical to
    scoring one request at a time."""
    if len(requests) > batch_size:
        raise ValueError(f"batch of {len(requests)} exceeds B={batch_size}")
    return scorer.next_token_logprobs_batch(requests)


# node: (gen, trace, tpos, open_gap, close_gap)
_Node = tuple[TokenSeq, tuple[float, ...], int, int | None, int | None]


def constrained_dfs(inp: SearchInput,
                    cfg: SearchConfig) -> tuple[list[Hypothesis], Diagnostics]:
    vocab = inp.vocabulary
    open_id, close_id, eos_id = vocab.open_id, vocab.close_id, vocab.eos_id
    tmpl = inp.template.tokens
    n = len(tmpl)
    source = inp.source_marked.tokens
    gaps = None if cfg.open_gaps is None else cfg.open_gaps.gaps
    allow_empty = cfg.allow_empty_spans

    heap = TopKHeap(cfg.k)
    diag = Diagnostics()
    start = perf_counter()

    def candidates(node: _Node, count: Diagnostics | None = None):
        gen, trace, tpos, og, cg = node
        out = []
        if tpos < n:
            out.append((tmpl[tpos], 0))
        elif og is not None and cg is not None:
            out.append((eos_id, 0))
        if og is None:
            if allow_empty or tpos < n:
                if gaps is None or tpos in gaps:
                    out.append((open_id, 1))
                elif count is not None:
                    count.gap_pruned += 1
        elif cg is None:
            if allow_empty or tpos > og:
                out.append((close_id, 1))
        return out

    rows: dict[TokenSeq, dict[int, float]] = {}

    def score_node(node: _Node, cands, stack) -> dict[int, float]:
        gen = node[0]
        row = rows.get(gen)
        if row is not None and all(t in row for t, _ in cands):
            return row
        requests, keys = [], []

        def enqueue(g, toks):
            cached = rows.setdefault(g, {})
            missing = [t for t in toks if t not in cached]
            if missing:
                requests.append((source, (inp.prefix,) + g, missing))
                keys.append((g, missing))

        enqueue(gen, [t for t, _ in cands])
        # prefetch pending nodes from the top of the stack; the scorer is
        # pure, so speculative rows cannot change the search trajectory
        for pending in reversed(stack):
            if len(requests) >= cfg.batch_size:
                break
            pgen = pending[0]
            if pgen and pgen[-1] == eos_id:
                continue
            ptoks = [t for t, _ in candidates(pending)]
            if ptoks:
                enqueue(pgen, ptoks)
        results = batched_expand(requests, inp.scorer, cfg.batch_size)
        diag.scorer_calls += 1
        for (g, missing), lps in zip(keys, results):
            rows[g].update(zip(missing, lps))
        return rows[gen]

    stack: list[_Node] = [((), (0.0,), 0, None, None)]
    while stack:
        node = stack.pop()
        gen, trace, tpos, og, cg = node
        j = len(gen)
        if j:
            if cfg.bound_mode == "exact":
                gamma = exact_bound(heap)
            else:
                gamma = heuristic_bound(heap, j, cfg.delta, open_id)
            if not trace[-1] > gamma:
                diag.bound_pruned += 1
                continue
        if gen and gen[-1] == eos_id:
            heap.push(Hypothesis(tokens=(inp.prefix,) + gen, trace=trace,
                                 placement=Placement(og, cg)))
            diag.completed += 1
            continue
        diag.nodes_expanded += 1
        cands = candidates(node, diag)
        if not cands:
            continue
        row = score_node(node, cands, stack)
        scored = sorted(((row[t], pri, t) for t, pri in cands),
                        key=lambda e: (-e[0], e[1]))
        for lp, _pri, tok in reversed(scored):
            child_trace = trace + (trace[-1] + lp,)
            if tok == open_id:
                stack.append((gen + (tok,), child_trace, tpos, tpos, cg))
            elif tok == close_id:
                stack.append((gen + (tok,), child_trace, tpos, og, tpos))
            else:
                new_tpos = tpos + (0 if tok == eos_id else 1)
                stack.append((gen + (tok,), child_trace, new_tpos, og, cg))

    diag.wall_time = perf_counter() - start
    return heap.sorted_hypotheses(), diag


_MAX_TEMPLATE = 64
_MAX_PLACEMENTS = 1_000_000


def brute_force_topk(inp: SearchInput, k: int, open_gaps=None,
                     allow_empty: bool = False,
                     diag: Diagnostics | None = None) -> list[Hypothesis]:
    """Score every placement exhaustively; independent of the DFS path.

    Ties break lexicographically by placement.
    """
    n = len(inp.template)
    if n > _MAX_TEMPLATE:
        raise CapacityError(f"template length {n} exceeds oracle guard")
    if count_placements(n, 1, allow_empty) > _MAX_PLACEMENTS:
        raise CapacityError("placement count exceeds oracle guard")
    vocab = inp.vocabulary
    gaps = open_gaps.gaps if isinstance(open_gaps, OpenGapSet) else open_gaps
    source = inp.source_marked.tokens
    results = []
    for p in iter_placements(n, allow_empty, gaps):
        body = placement_to_sequence(vocab, inp.template, p)
        seq = (inp.prefix,) + body + (vocab.eos_id,)
        trace = [0.0]
        for i in range(1, len(seq)):
            (lp,) = inp.scorer.next_token_logprobs(source, seq[:i], [seq[i]])
            trace.append(trace[-1] + lp)
            if diag is not None:
                diag.scorer_calls += 1
        results.append(Hypothesis(tokens=seq, trace=tuple(trace), placement=p))
    results.sort(key=lambda h: (-h.score, h.placement))
    return results[:k]


def csbs_search(inp: SearchInput, beam_size: int, *, open_gaps=None,
                allow_empty: bool = False,
                diag: Diagnostics | None = None) -> list[Hypothesis]:
    """Breadth-wise beam search over the same constrained candidate space.

    No lower bounds; per step the beam_size best partials survive. All
    completed hypotheses are collected and returned ranked by score.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    vocab = inp.vocabulary
    open_id, close_id, eos_id = vocab.open_id, vocab.close_id, vocab.eos_id
    tmpl = inp.template.tokens
    n = len(tmpl)
    gaps = open_gaps.gaps if isinstance(open_gaps, OpenGapSet) else open_gaps
    source = inp.source_marked.tokens

    def candidates(node: _Node):
        gen, trace, tpos, og, cg = node
        out = []
        if tpos < n:
            out.append(tmpl[tpos])
        elif og is not None and cg is not None:
            out.append(eos_id)
        if og is None:
            if (allow_empty or tpos < n) and (gaps is None or tpos in gaps):
                out.append(open_id)
        elif cg is None:
            if allow_empty or tpos > og:
                out.append(close_id)
        return out

    frontier: list[_Node] = [((), (0.0,), 0, None, None)]
    completed: list[Hypothesis] = []
    while frontier:
        requests = []
        cand_sets = []
        for node in frontier:
            cands = candidates(node)
            cand_sets.append(cands)
            requests.append((source, (inp.prefix,) + node[0], cands))
        results = inp.scorer.next_token_logprobs_batch(requests)
        if diag is not None:
            diag.scorer_calls += 1
            diag.nodes_expanded += len(frontier)
        children: list[_Node] = []
        for node, cands, lps in zip(frontier, cand_sets, results):
            gen, trace, tpos, og, cg = node
            for tok, lp in zip(cands, lps):
                child_trace = trace + (trace[-1] + lp,)
                if tok == open_id:
                    children.append((gen + (tok,), child_trace, tpos, tpos, cg))
                elif tok == close_id:
                    children.append((gen + (tok,), child_trace, tpos, og, tpos))
                elif tok == eos_id:
                    completed.append(Hypothesis(
                        tokens=(inp.prefix,) + gen + (tok,),
                        trace=child_trace, placement=Placement(og, cg)))
                else:
                    children.append((gen + (tok,), child_trace, tpos + 1, og, cg))
        children.sort(key=lambda nd: -nd[1][-1])  # stable: FIFO on ties
        frontier = children[:beam_size]
    order = {id(h): i for i, h in enumerate(completed)}
    completed.sort(key=lambda h: (-h.score, order[id(h)]))
    return completed
