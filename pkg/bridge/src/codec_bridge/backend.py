"""Scoring backends for the bridge service.

A backend answers conditional next-token log-probability queries over
token surfaces. Backends must be pure: identical queries always produce
identical answers (no sampling, no dropout, caching transparent).
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from pathlib import Path


class UnencodableTokenError(ValueError):
    """A token surface the backend cannot map into its vocabulary."""

    def __init__(self, token: str):
        super().__init__(f"unencodable token: {token!r}")
        self.token = token


class BackendLoadError(RuntimeError):
    pass


class Backend(ABC):
    model_id: str
    vocab_size: int

    @abstractmethod
    def logprobs(self, source_tokens: list[str], prefix_tokens: list[str],
                 candidate_tokens: list[str]) -> list[float]:
        ...

    def sequence_logprob(self, source_tokens: list[str],
                         target_tokens: list[str]) -> float:
        """Teacher-forced chain-rule total; the first target token
        conditions only and is not scored."""
        total = 0.0
        for i in range(1, len(target_tokens)):
            (lp,) = self.logprobs(source_tokens, target_tokens[:i],
                                  [target_tokens[i]])
            total += lp
        return total


class TableBackend(Backend):
    """Serves a table fixture file verbatim.

    Format: one entry per line, tab-separated
    ``source-key<TAB>prefix-key<TAB>token<TAB>logprob`` where the keys are
    space-joined token surfaces (empty string for the empty sequence);
    blank lines and ``#`` comments are skipped. Missing cells fall back to
    ``default_logprob``, mirroring the engine's local table scorer.
    """

    def __init__(self, path: str | Path, default_logprob: float = -30.0):
        path = Path(path)
        try:
            raw = path.read_bytes()
        except OSError as e:
            raise BackendLoadError(f"cannot read table fixture: {e}") from e
        self.default_logprob = default_logprob
        self.entries: dict[tuple[tuple[str, ...], tuple[str, ...], str],
                           float] = {}
        surfaces: set[str] = set()
        for lineno, line in enumerate(raw.decode("utf-8").splitlines(), 1):
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise BackendLoadError(
                    f"{path}:{lineno}: expected 4 tab-separated fields")
            src_key, pfx_key, token, logprob = fields
            src = tuple(src_key.split(" ")) if src_key else ()
            pfx = tuple(pfx_key.split(" ")) if pfx_key else ()
            try:
                self.entries[(src, pfx, token)] = float(logprob)
            except ValueError:
                raise BackendLoadError(
                    f"{path}:{lineno}: bad logprob {logprob!r}") from None
            surfaces.update(src)
            surfaces.update(pfx)
            surfaces.add(token)
        self.model_id = ("table:"
                         + hashlib.blake2b(raw, digest_size=6).hexdigest())
        self.vocab_size = len(surfaces)

    def logprobs(self, source_tokens, prefix_tokens, candidate_tokens):
        src = tuple(source_tokens)
        pfx = tuple(prefix_tokens)
        return [self.entries.get((src, pfx, tok), self.default_logprob)
                for tok in candidate_tokens]


class Seq2SeqBackend(Backend):
    """Teacher-forced scoring through a sequence-to-sequence model.

    Tokens arriving on the wire are whitespace-level surfaces; each one is
    encoded to its subword pieces and a candidate's score is the sum of
    its pieces' teacher-forced log-probabilities (greedy within the
    candidate). Sampling and dropout are disabled for determinism.
    """

    def __init__(self, model_name: str):
        try:
            import torch
            from transformers import (AutoModelForSeq2SeqLM, AutoTokenizer)
        except ImportError as e:
            raise BackendLoadError(
                f"seq2seq backend needs transformers+torch: {e}") from e
        try:
            self._tok = AutoTokenizer.from_pretrained(model_name)
            self._model = AutoModelForSeq2SeqLM.from_pretrained(model_name)
        except Exception as e:
            raise BackendLoadError(
                f"cannot load model {model_name!r}: {e}") from e
        self._model.eval()
        self._torch = torch
        self.model_id = f"seq2seq:{model_name}"
        self.vocab_size = int(self._tok.vocab_size)

    def _pieces(self, token: str) -> list[int]:
        ids = self._tok.encode(token, add_special_tokens=False)
        if not ids or (self._tok.unk_token_id is not None
                       and self._tok.unk_token_id in ids):
            raise UnencodableTokenError(token)
        return ids

    def logprobs(self, source_tokens, prefix_tokens, candidate_tokens):
        torch = self._torch
        src_ids = self._tok(" ".join(source_tokens),
                            return_tensors="pt").input_ids
        prefix_ids = [i for t in prefix_tokens for i in self._pieces(t)]
        start = self._model.config.decoder_start_token_id
        out = []
        with torch.no_grad():
            for cand in candidate_tokens:
                cand_ids = self._pieces(cand)
                dec = torch.tensor([[start] + prefix_ids + cand_ids[:-1]])
                logits = self._model(input_ids=src_ids,
                                     decoder_input_ids=dec).logits[0]
                logp = torch.log_softmax(logits, dim=-1)
                total = 0.0
                base = len(prefix_ids)
                for j, piece in enumerate(cand_ids):
                    total += float(logp[base + j, piece])
                out.append(total)
        return out


def load_backend(spec: str) -> Backend:
    """Build a backend from a --backend spec string
    (``table:<path>`` or ``seq2seq:<model-id>``)."""
    kind, _, rest = spec.partition(":")
    if kind == "table" and rest:
        return TableBackend(rest)
    if kind == "seq2seq" and rest:
        return Seq2SeqBackend(rest)
    raise BackendLoadError(
        f"unknown backend spec {spec!r} (table:<path> | seq2seq:<model>)")
