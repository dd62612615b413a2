"""Constrained marker projection into fixed translation templates."""

from .bridge import BridgeError, BridgeScorer, WIRE_VERSION
from .pipeline import (
    PipelineConfig,
    ProjectionResult,
    SpanProjection,
    STATUS_DROPPED_FILTER,
    STATUS_DROPPED_OVERLAP,
    STATUS_DROPPED_UNPROJECTED,
    STATUS_OK,
    STATUS_PARTIAL,
    decompose,
    project,
    recombine,
)
from .pruning import (
    DeltaProfile,
    OpenGapSet,
    PruneConfig,
    candidate_open_gaps,
    compute_deltas,
)
from .rerank import (
    FilterConfig,
    ScoredCandidate,
    extract_span,
    filter_example,
    lexical_span_score,
    rerank,
    span_score,
)
from .scorer import (
    DEFAULT_PLANTED_SPIKE,
    DEFAULT_PLANTED_WORDS,
    PlantedAlignmentScorer,
    PlantedInstance,
    Scorer,
    TableScorer,
    build_planted_suite,
    load_table_fixture,
    make_planted_vocab,
    save_table_fixture,
    sequence_logprob,
)
from .search import (
    Diagnostics,
    SearchConfig,
    SearchInput,
    TopKHeap,
    batched_expand,
    brute_force_topk,
    constrained_dfs,
    csbs_search,
    exact_bound,
    heuristic_bound,
)
from .types import (
    CapacityError,
    Hypothesis,
    LabeledSpan,
    MalformedHypothesisError,
    MarkedSource,
    Placement,
    SourceExample,
    Template,
    TokenSeq,
    Vocabulary,
    VocabularyError,
    count_placements,
    insert_markers,
    iter_placements,
    placement_to_sequence,
    strip_markers,
)

__version__ = "0.1.0"
