"""HTTP client scorer speaking the bridge wire protocol.

The bridge owns tokenization, so the wire carries token surfaces; this
client translates between the engine's ids and surfaces. A custom POST
callable can be injected for in-process testing.
"""

from __future__ import annotations

from .scorer import Scorer
from .types import Vocabulary, VocabularyError

WIRE_VERSION = "1"


class BridgeError(RuntimeError):
    pass


def _default_post(url: str):
    import requests

    def post(path: str, payload: dict) -> dict:
        resp = requests.post(url.rstrip("/") + path, json=payload, timeout=60)
        if resp.status_code != 200:
            raise BridgeError(
                f"bridge returned {resp.status_code}: {resp.text[:200]}")
        return resp.json()

    return post


class BridgeScorer(Scorer):
    def __init__(self, vocab: Vocabulary, url: str | None = None,
                 post=None):
        if post is None:
            if url is None:
                raise ValueError("BridgeScorer needs a url or a post callable")
            post = _default_post(url)
        self.vocab = vocab
        self._post = post

    def _surfaces(self, ids) -> list[str]:
        return [self.vocab.surface_of(i) for i in ids]

    def next_token_logprobs(self, source, prefix, candidates):
        payload = {
            "v": WIRE_VERSION,
            "source_tokens": self._surfaces(source),
            "prefix_tokens": self._surfaces(prefix),
            "candidate_tokens": self._surfaces(candidates),
        }
        data = self._post("/logprobs", payload)
        logprobs = data["logprobs"]
        if len(logprobs) != len(candidates):
            raise BridgeError("logprob count mismatch")
        return [float(x) for x in logprobs]

    def next_token_logprobs_batch(self, requests):
        payload = {
            "v": WIRE_VERSION,
            "requests": [{
                "source_tokens": self._surfaces(s),
                "prefix_tokens": self._surfaces(p),
                "candidate_tokens": self._surfaces(c),
            } for s, p, c in requests],
        }
        data = self._post("/logprobs_batch", payload)
        return [[float(x) for x in r["logprobs"]] for r in data["responses"]]
