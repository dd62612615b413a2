#!/usr/bin/env python3
"""Regenerate the bridge-parity fixtures under tests/data/.

Runs the projection engine over a small generated suite while recording
every scorer row it touches, then freezes those rows as a table fixture
plus the engine's output over that fixture. Replaying the same suite with
the table fixture (locally or through the bridge's table backend) touches
exactly the recorded rows, so outputs must match bit-for-bit.
"""

import io
import subprocess
import sys
from pathlib import Path

from codec import Scorer, save_table_fixture
from codec.cli import (
    _collect_surfaces,
    build_pipeline_config,
    make_scorer,
    run_records,
)

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"
SEED = 71
COUNT = 5


class RecordingScorer(Scorer):
    """Delegates to a base scorer, remembering every touched row in full."""

    def __init__(self, base, vocab):
        self.base = base
        self.vocab = vocab
        self.rows = {}

    def next_token_logprobs(self, source, prefix, candidates):
        source, prefix = tuple(source), tuple(prefix)
        key = (source, prefix)
        if key not in self.rows:
            self.rows[key] = self.base.next_token_logprobs(
                source, prefix, list(range(self.vocab.size)))
        row = self.rows[key]
        return [row[c] for c in candidates]


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    suite = DATA / "parity_suite.jsonl"
    subprocess.run(
        ["codec", "gen", "--seed", str(SEED), "--count", str(COUNT),
         "--n-min", "3", "--n-max", "5", "--words", "12",
         "-o", str(suite), "--gold", str(DATA / "parity_gold.jsonl")],
        check=True)
    lines = suite.read_text().splitlines()

    vocab, base = make_scorer(f"planted:{SEED}:2.0:4.0:12", lines)
    recorder = RecordingScorer(base, vocab)
    cfg = build_pipeline_config(
        search="codec", mode="test", k=5, delta=None, alpha1=0.5, alpha2=0.1,
        sigma=5, batch_size=16, beam=16, no_prune=False, no_rerank=False,
        no_filter=True, allow_empty=False)
    sink = io.StringIO()
    assert run_records(lines, vocab, recorder, cfg, workers=1, timing=False,
                       out=sink) == 0

    entries = {(src, pfx, tok): lp
               for (src, pfx), row in sorted(recorder.rows.items())
               for tok, lp in enumerate(row)}
    table = DATA / "parity_table.tsv"
    save_table_fixture(table, vocab, entries)

    # replay through the frozen table and check it reproduces the run
    tvocab, tscorer = make_scorer(f"table:{table}", lines)
    replay = io.StringIO()
    assert run_records(lines, tvocab, tscorer, cfg, workers=1, timing=False,
                       out=replay) == 0
    if replay.getvalue() != sink.getvalue():
        print("error: table replay diverged from the recorded run",
              file=sys.stderr)
        return 1
    (DATA / "table_golden_output.jsonl").write_text(replay.getvalue())
    print(f"wrote {table} ({len(entries)} entries) and "
          f"table_golden_output.jsonl ({COUNT} records)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
