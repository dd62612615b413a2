"""Conditional next-token log-probability oracles.

Scorers are pure: identical (source, prefix, candidates) arguments always
produce identical outputs, and exp of a row over the full vocabulary sums
to one. Search, oracle, and re-ranking all share the same scorer so their
arithmetic agrees bit-for-bit.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .types import (
    LabeledSpan,
    MarkedSource,
    Placement,
    SourceExample,
    Template,
    TokenSeq,
    Vocabulary,
    VocabularyError,
    insert_markers,
)


class Scorer(ABC):
    """Deterministic conditional next-token log-probability oracle."""

    @abstractmethod
    def next_token_logprobs(self, source: TokenSeq, prefix: TokenSeq,
                            candidates) -> list[float]:
        ...

    def next_token_logprobs_batch(self, requests) -> list[list[float]]:
        """Score a batch of (source, prefix, candidates) in one invocation.

        Subclasses backed by remote or vectorized models override this; the
        default just loops. One call to this method counts as one scorer
        invocation for diagnostics purposes.
        """
        return [self.next_token_logprobs(s, p, c) for s, p, c in requests]


def sequence_logprob(scorer: Scorer, source: TokenSeq,
                     target: TokenSeq) -> float:
    """Chain-rule log-prob of a framed target (PREFIX . body . EOS).

    Accumulates left to right, matching the order the search builds its
    traces, so both paths produce identical floats.
    """
    total = 0.0
    for i in range(1, len(target)):
        (lp,) = scorer.next_token_logprobs(source, target[:i], [target[i]])
        total += lp
    return total


def _hash_rng(*parts) -> np.random.Generator:
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"|")
    return np.random.default_rng(int.from_bytes(h.digest(), "little"))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max()
    return logits - (m + np.log(np.exp(logits - m).sum()))


class TableScorer(Scorer):
    """Lookup-table scorer, optionally backed by seeded random rows.

    Explicit entries map (source, prefix, token) to a log-prob, with
    ``default_logprob`` as the fallback for missing cells. When ``seed`` is
    set and a row has no explicit entries, the row is a reproducible random
    distribution normalized over the declared vocabulary.
    """

    def __init__(self, vocab: Vocabulary, entries=None,
                 default_logprob: float = -30.0, seed: int | None = None):
        self.vocab = vocab
        self.entries = dict(entries or {})
        self.default_logprob = default_logprob
        self.seed = seed
        self._row_keys = {(s, p) for (s, p, _t) in self.entries}
        self._row_cache: dict[tuple, np.ndarray] = {}

    def _random_row(self, source: TokenSeq, prefix: TokenSeq) -> np.ndarray:
        key = (source, prefix)
        row = self._row_cache.get(key)
        if row is None:
            rng = _hash_rng("table", self.seed, source, prefix)
            row = _log_softmax(rng.standard_normal(self.vocab.size))
            self._row_cache[key] = row
        return row

    def next_token_logprobs(self, source, prefix, candidates):
        source, prefix = tuple(source), tuple(prefix)
        for c in candidates:
            if not 0 <= c < self.vocab.size:
                raise VocabularyError(f"unknown token id: {c}")
        if self.seed is not None and (source, prefix) not in self._row_keys:
            row = self._random_row(source, prefix)
            return [float(row[c]) for c in candidates]
        return [self.entries.get((source, prefix, c), self.default_logprob)
                for c in candidates]


def load_table_fixture(path, vocab: Vocabulary, **kwargs) -> TableScorer:
    """Read a table fixture: one tab-separated entry per line,
    ``source-key<TAB>prefix-key<TAB>token<TAB>logprob`` with keys being
    space-joined token surfaces (empty string for the empty sequence)."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields")
            src_key, pfx_key, token, logprob = fields
            src = vocab.encode(src_key.split(" ")) if src_key else ()
            pfx = vocab.encode(pfx_key.split(" ")) if pfx_key else ()
            entries[(src, pfx, vocab.id_of(token))] = float(logprob)
    return TableScorer(vocab, entries=entries, **kwargs)


def save_table_fixture(path, vocab: Vocabulary, entries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (src, pfx, tok), lp in entries.items():
            fh.write("\t".join((" ".join(vocab.decode(src)),
                                " ".join(vocab.decode(pfx)),
                                vocab.surface_of(tok),
                                repr(lp))) + "\n")


DEFAULT_PLANTED_WORDS = 64
DEFAULT_PLANTED_SPIKE = 4.0


def make_planted_vocab(n_words: int = DEFAULT_PLANTED_WORDS) -> Vocabulary:
    """Vocabulary for the planted world: n_words source-side surfaces
    (s0..) followed by their target-side translations (t0..)."""
    surfaces = [f"s{i}" for i in range(n_words)] + \
               [f"t{i}" for i in range(n_words)]
    return Vocabulary.build(surfaces)


class PlantedAlignmentScorer(Scorer):
    """Synthetic scorer with a planted token-identity alignment.

    Source-side words translate position-for-position into target-side
    words, so the correct marker placement in the template mirrors the
    marker positions found in the conditioning source. At each step the
    "correct" continuation gets a logit bonus of ``spike``; every other
    token sits at zero (markers are pushed to ``-spike`` when the source
    carries no markers). With ``noise`` > 0 a reproducible hash-seeded
    perturbation is added to rows whose prefix already contains a marker,
    which leaves both the position-delta profile and reverse span scoring
    exactly clean while making whole-hypothesis scores noisy.
    """

    def __init__(self, vocab: Vocabulary, n_words: int,
                 seed: int = 0, spike: float = DEFAULT_PLANTED_SPIKE,
                 noise: float = 0.0):
        self.vocab = vocab
        self.n_words = n_words
        self.seed = seed
        self.spike = spike
        self.noise = noise
        self._src_lo = 4
        self._tgt_lo = 4 + n_words
        self._row_cache: dict[tuple, np.ndarray] = {}

    def translate(self, token_id: int) -> int:
        return token_id + self.n_words

    def invert(self, token_id: int) -> int:
        return token_id - self.n_words

    def _is_src_word(self, t: int) -> bool:
        return self._src_lo <= t < self._tgt_lo

    def _is_tgt_word(self, t: int) -> bool:
        return self._tgt_lo <= t < self._tgt_lo + self.n_words

    def _desired(self, source: TokenSeq, gen: TokenSeq) -> int | None:
        v = self.vocab
        marked = v.open_id in source
        if marked:
            o = source.index(v.open_id)
            c = source.index(v.close_id)
            plain = source[:o] + source[o + 1:c] + source[c + 1:]
            gold_open, gold_close = o, c - 1
        else:
            plain = source
            gold_open = gold_close = None
        if not plain:
            return v.eos_id
        content = [t for t in gen if t not in (v.open_id, v.close_id)]
        consumed = len(content)
        if marked:
            open_at = None
            if v.open_id in gen:
                open_at = sum(1 for t in gen[:gen.index(v.open_id)]
                              if t not in (v.open_id, v.close_id))
            if open_at is None and consumed == gold_open:
                return v.open_id
            if (open_at == gold_open and v.close_id not in gen
                    and consumed == gold_close):
                return v.close_id
        if consumed >= len(plain):
            return v.eos_id
        nxt = plain[consumed]
        if self._is_src_word(nxt):
            return self.translate(nxt)
        if self._is_tgt_word(nxt):
            return self.invert(nxt)
        return None

    def _row(self, source: TokenSeq, prefix: TokenSeq) -> np.ndarray:
        key = (source, prefix)
        row = self._row_cache.get(key)
        if row is not None:
            return row
        v = self.vocab
        gen = prefix[1:] if prefix and prefix[0] == v.prefix_id else prefix
        logits = np.zeros(v.size)
        desired = self._desired(source, gen)
        if desired is not None:
            logits[desired] += self.spike
        if v.open_id not in source:
            logits[v.open_id] -= self.spike
            logits[v.close_id] -= self.spike
        has_marker = any(t in (v.open_id, v.close_id) for t in gen)
        if self.noise > 0.0 and has_marker:
            rng = _hash_rng("planted", self.seed, source, prefix)
            logits = logits + rng.uniform(-self.noise, self.noise, v.size)
        row = _log_softmax(logits)
        self._row_cache[key] = row
        return row

    def next_token_logprobs(self, source, prefix, candidates):
        source, prefix = tuple(source), tuple(prefix)
        for c in candidates:
            if not 0 <= c < self.vocab.size:
                raise VocabularyError(f"unknown token id: {c}")
        row = self._row(source, prefix)
        return [float(row[c]) for c in candidates]


@dataclass(frozen=True)
class PlantedInstance:
    """One synthetic 1-projection problem with its known answer."""

    marked: MarkedSource
    plain: TokenSeq
    template: Template
    gold: Placement
    scorer: PlantedAlignmentScorer


def build_planted_suite(seed: int, count: int, n_range: tuple[int, int],
                        noise: float = 0.0, *,
                        n_words: int = DEFAULT_PLANTED_WORDS,
                        spike: float = DEFAULT_PLANTED_SPIKE,
                        label: str = "SPAN"):
    """Reproducible planted 1-projection instances sharing one scorer."""
    if count < 1:
        raise ValueError("count must be >= 1")
    vocab = make_planted_vocab(n_words)
    scorer = PlantedAlignmentScorer(vocab, n_words, seed=seed, spike=spike,
                                    noise=noise)
    rng = np.random.default_rng(seed)
    instances = []
    lo, hi = n_range
    for _ in range(count):
        n = int(rng.integers(lo, hi + 1))
        src = tuple(int(rng.integers(0, n_words)) + 4 for _ in range(n))
        o = int(rng.integers(0, n))
        c = int(rng.integers(o + 1, n + 1))
        span = LabeledSpan(o, c, label)
        marked = insert_markers(vocab, src, span)
        template = Template(tuple(scorer.translate(t) for t in src))
        instances.append(PlantedInstance(
            marked=marked, plain=src, template=template,
            gold=Placement(o, c), scorer=scorer))
    return vocab, instances
