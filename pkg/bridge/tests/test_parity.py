"""Bridge table-backend parity against the frozen local-table golden run."""

import io
import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from codec import BridgeError, BridgeScorer
from codec.cli import _collect_surfaces, build_pipeline_config, run_records
from codec.types import Vocabulary

from codec_bridge import TableBackend, create_app

DATA = Path(__file__).resolve().parent.parent.parent / "tests" / "data"


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(TableBackend(DATA / "parity_table.tsv")))


@pytest.fixture(scope="module")
def bridge_post(client):
    def post(path, payload):
        resp = client.post(path, json=payload)
        if resp.status_code != 200:
            raise BridgeError(f"bridge returned {resp.status_code}")
        return resp.json()

    return post


def check(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


class TestGoldenParity:
    def test_engine_reproduces_local_table_run(self, bridge_post):
        lines = (DATA / "parity_suite.jsonl").read_text().splitlines()
        vocab = Vocabulary.build(_collect_surfaces(lines))
        scorer = BridgeScorer(vocab, post=bridge_post)
        cfg = build_pipeline_config(
            search="codec", mode="test", k=5, delta=None, alpha1=0.5,
            alpha2=0.1, sigma=5, batch_size=16, beam=16, no_prune=False,
            no_rerank=False, no_filter=True, allow_empty=False)
        sink = io.StringIO()
        assert run_records(lines, vocab, scorer, cfg, workers=1,
                           timing=False, out=sink) == 0
        got = [json.loads(line) for line in sink.getvalue().splitlines()]
        frozen = [json.loads(line) for line in
                  (DATA / "table_golden_output.jsonl").read_text()
                  .splitlines()]
        assert len(got) == len(frozen)
        mismatches = 0
        for g, f in zip(got, frozen):
            same = g["id"] == f["id"] and g["status"] == f["status"]
            for gs, fs in zip(g["projected_spans"], f["projected_spans"]):
                same = same and (gs["open_gap"], gs["close_gap"]) == \
                    (fs["open_gap"], fs["close_gap"])
                for key in ("hyp_score", "span_score"):
                    ga, fa = gs[key], fs[key]
                    if ga is None or fa is None:
                        same = same and ga == fa
                    else:
                        same = same and abs(ga - fa) <= 1e-9
                same = same and len(gs["topk"]) == len(fs["topk"])
                for gt, ft in zip(gs["topk"], fs["topk"]):
                    same = same and \
                        (gt["open_gap"], gt["close_gap"]) == \
                        (ft["open_gap"], ft["close_gap"]) and \
                        abs(gt["score"] - ft["score"]) <= 1e-9
            mismatches += 0 if same else 1
        check("bridge-parity", mismatches == 0,
              f"{len(got)} records through the bridge table backend, "
              f"{mismatches} differ from the local-table golden run")

    def test_byte_identical_output(self, bridge_post):
        # stronger than the score tolerance: the emitted JSONL matches the
        # frozen local-table run byte for byte
        lines = (DATA / "parity_suite.jsonl").read_text().splitlines()
        vocab = Vocabulary.build(_collect_surfaces(lines))
        scorer = BridgeScorer(vocab, post=bridge_post)
        cfg = build_pipeline_config(
            search="codec", mode="test", k=5, delta=None, alpha1=0.5,
            alpha2=0.1, sigma=5, batch_size=16, beam=16, no_prune=False,
            no_rerank=False, no_filter=True, allow_empty=False)
        sink = io.StringIO()
        run_records(lines, vocab, scorer, cfg, workers=1, timing=False,
                    out=sink)
        assert sink.getvalue() == \
            (DATA / "table_golden_output.jsonl").read_text()
