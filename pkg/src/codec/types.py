"""Token, span, template, placement, and hypothesis primitives.

All values are immutable after construction and safe to share between
threads. Token sequences are plain tuples of integer ids; surfaces live in
the Vocabulary only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, inf

TokenSeq = tuple[int, ...]


class MalformedHypothesisError(ValueError):
    """Sequence does not contain exactly one OPEN followed by one CLOSE."""


class VocabularyError(KeyError):
    """Unknown token surface or id."""


class CapacityError(RuntimeError):
    """Instance exceeds the brute-force enumeration guard."""


@dataclass(frozen=True)
class Vocabulary:
    """Bijective surface/id map with the four reserved marker/frame ids."""

    surfaces: tuple[str, ...]
    open_id: int
    close_id: int
    prefix_id: int
    eos_id: int
    _surface_to_id: dict[str, int] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        mapping = {s: i for i, s in enumerate(self.surfaces)}
        if len(mapping) != len(self.surfaces):
            raise VocabularyError("duplicate surface in vocabulary")
        reserved = (self.open_id, self.close_id, self.prefix_id, self.eos_id)
        if len(set(reserved)) != 4:
            raise VocabularyError("reserved ids must be pairwise distinct")
        for rid in reserved:
            if not 0 <= rid < len(self.surfaces):
                raise VocabularyError(f"reserved id {rid} out of range")
        object.__setattr__(self, "_surface_to_id", mapping)

    @classmethod
    def build(cls, content_surfaces, *, open_surface="[", close_surface="]",
              prefix_surface="<tgt>", eos_surface="</s>") -> "Vocabulary":
        reserved = (open_surface, close_surface, prefix_surface, eos_surface)
        extra = tuple(s for s in dict.fromkeys(content_surfaces) if s not in reserved)
        return cls(surfaces=reserved + extra, open_id=0, close_id=1,
                   prefix_id=2, eos_id=3)

    @property
    def size(self) -> int:
        return len(self.surfaces)

    def id_of(self, surface: str) -> int:
        try:
            return self._surface_to_id[surface]
        except KeyError:
            raise VocabularyError(f"unknown surface: {surface!r}") from None

    def surface_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.surfaces):
            raise VocabularyError(f"unknown token id: {token_id}")
        return self.surfaces[token_id]

    def encode(self, surfaces) -> TokenSeq:
        return tuple(self.id_of(s) for s in surfaces)

    def decode(self, ids) -> tuple[str, ...]:
        return tuple(self.surface_of(i) for i in ids)


@dataclass(frozen=True, order=True)
class LabeledSpan:
    """Half-open token span [start, end) with a label."""

    start: int
    end: int
    label: str

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span bounds ({self.start}, {self.end})")


@dataclass(frozen=True)
class SourceExample:
    """Plain source sentence with its labeled spans."""

    tokens: TokenSeq
    spans: tuple[LabeledSpan, ...]

    def __post_init__(self):
        n = len(self.tokens)
        for s in self.spans:
            if s.end > n:
                raise ValueError(f"span {s} out of range for length {n}")
        ordered = sorted(self.spans)
        for a, b in zip(ordered, ordered[1:]):
            if b.start < a.end:
                raise ValueError(f"overlapping or nested spans: {a} / {b}")


@dataclass(frozen=True)
class MarkedSource:
    """Source sentence with one marker pair around a single span."""

    tokens: TokenSeq
    span_label: str


@dataclass(frozen=True)
class Template:
    """Marker-free target sentence the final output must reproduce."""

    tokens: TokenSeq

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True, order=True)
class Placement:
    """Marker pair position over template gaps 0..n.

    Gap g sits immediately before content token g; gap n is after the last
    token. open_gap == close_gap is an empty span (only meaningful when
    empty spans are allowed).
    """

    open_gap: int
    close_gap: int

    def __post_init__(self):
        if self.open_gap < 0 or self.open_gap > self.close_gap:
            raise ValueError(
                f"invalid placement ({self.open_gap}, {self.close_gap})")

    @property
    def is_empty(self) -> bool:
        return self.open_gap == self.close_gap


@dataclass(frozen=True)
class Hypothesis:
    """Completed decode: PREFIX . (template with one marker pair) . EOS.

    trace[j] is the cumulative log-prob after generating j tokens past the
    prefix; trace[0] is 0 and the final entry is the hypothesis score.
    """

    tokens: TokenSeq
    trace: tuple[float, ...]
    placement: Placement

    def __post_init__(self):
        if not self.trace or self.trace[0] != 0.0:
            raise ValueError("trace must start at 0.0")
        if len(self.trace) != len(self.tokens):
            # one entry per generated token plus the leading zero;
            # tokens include the prefix, so lengths coincide
            raise ValueError("trace length must equal token count")
        for a, b in zip(self.trace, self.trace[1:]):
            if b > a + 1e-9:
                raise ValueError("trace must be non-increasing")

    @property
    def score(self) -> float:
        return self.trace[-1]

    def body(self) -> TokenSeq:
        """Generated tokens without the prefix and the trailing EOS."""
        return self.tokens[1:-1]


def insert_markers(vocab: Vocabulary, source: TokenSeq,
                   span: LabeledSpan) -> MarkedSource:
    """Surround one labeled span of the plain source with the marker pair."""
    if span.end > len(source):
        raise ValueError(f"span {span} out of range for length {len(source)}")
    tokens = (source[:span.start] + (vocab.open_id,)
              + source[span.start:span.end] + (vocab.close_id,)
              + source[span.end:])
    return MarkedSource(tokens=tokens, span_label=span.label)


def strip_markers(vocab: Vocabulary, seq: TokenSeq) -> tuple[TokenSeq, Placement]:
    """Remove the single marker pair, returning the plain sequence and the
    gap indices the markers occupied (in marker-free coordinates)."""
    opens = [i for i, t in enumerate(seq) if t == vocab.open_id]
    closes = [i for i, t in enumerate(seq) if t == vocab.close_id]
    if len(opens) != 1 or len(closes) != 1 or opens[0] > closes[0]:
        raise MalformedHypothesisError(
            f"expected exactly one ordered marker pair, got opens={opens} "
            f"closes={closes}")
    o, c = opens[0], closes[0]
    plain = seq[:o] + seq[o + 1:c] + seq[c + 1:]
    return plain, Placement(open_gap=o, close_gap=c - 1)


def placement_to_sequence(vocab: Vocabulary, template: Template,
                          p: Placement) -> TokenSeq:
    """Inverse of strip_markers over the template's content tokens."""
    n = len(template)
    if p.close_gap > n:
        raise ValueError(f"placement {p} out of range for template length {n}")
    t = template.tokens
    return (t[:p.open_gap] + (vocab.open_id,) + t[p.open_gap:p.close_gap]
            + (vocab.close_id,) + t[p.close_gap:])


def count_placements(n: int, m: int, allow_empty: bool) -> int:
    """Size of the placement space for m marker pairs over n content tokens.

    With empty spans allowed this is C(n+2m, 2m); requiring every span to be
    nonempty collapses it to C(n+m, 2m) (for m=1: C(n+1, 2))."""
    if n < 0 or m < 0:
        raise ValueError("n and m must be non-negative")
    if allow_empty:
        return comb(n + 2 * m, 2 * m)
    return comb(n + m, 2 * m)


def iter_placements(n: int, allow_empty: bool, open_gaps=None):
    """Enumerate single-pair placements in lexicographic order."""
    for o in range(n + 1):
        if open_gaps is not None and o not in open_gaps:
            continue
        first_close = o if allow_empty else o + 1
        for c in range(first_close, n + 1):
            yield Placement(o, c)
