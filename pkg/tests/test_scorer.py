import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from codec import (
    PlantedAlignmentScorer,
    TableScorer,
    Vocabulary,
    VocabularyError,
    build_planted_suite,
    load_table_fixture,
    make_planted_vocab,
    save_table_fixture,
    sequence_logprob,
)


@pytest.fixture
def pvocab():
    return make_planted_vocab(8)


@pytest.fixture
def planted(pvocab):
    return PlantedAlignmentScorer(pvocab, 8, seed=3)


class TestTableScorer:
    def test_explicit_entries(self, small_vocab):
        v = small_vocab
        entries = {((4,), (2,), 5): math.log(0.5),
                   ((4,), (2, 5), 6): math.log(0.25)}
        scorer = TableScorer(v, entries=entries)
        assert scorer.next_token_logprobs((4,), (2,), [5]) == [math.log(0.5)]

    def test_default_logprob_fallback(self, small_vocab):
        scorer = TableScorer(small_vocab, default_logprob=-7.5)
        assert scorer.next_token_logprobs((4,), (2,), [9]) == [-7.5]

    def test_two_step_sequence_logprob(self, small_vocab):
        v = small_vocab
        entries = {((4,), (2,), 5): math.log(0.5),
                   ((4,), (2, 5), 3): math.log(0.25)}
        scorer = TableScorer(v, entries=entries)
        got = sequence_logprob(scorer, (4,), (2, 5, 3))
        assert got == pytest.approx(-2.0794415416798357, abs=1e-12)

    def test_unknown_id_raises(self, small_vocab):
        scorer = TableScorer(small_vocab)
        with pytest.raises(VocabularyError):
            scorer.next_token_logprobs((4,), (2,), [small_vocab.size])

    def test_seeded_rows_normalize(self, small_vocab):
        scorer = TableScorer(small_vocab, seed=11)
        row = scorer.next_token_logprobs((4, 5), (2,),
                                         list(range(small_vocab.size)))
        assert math.fsum(math.exp(x) for x in row) == pytest.approx(1.0)

    def test_seeded_rows_deterministic(self, small_vocab):
        a = TableScorer(small_vocab, seed=11)
        b = TableScorer(small_vocab, seed=11)
        args = ((4, 5), (2, 6), [4, 5, 6])
        assert a.next_token_logprobs(*args) == b.next_token_logprobs(*args)

    def test_different_seeds_differ(self, small_vocab):
        a = TableScorer(small_vocab, seed=11)
        b = TableScorer(small_vocab, seed=12)
        args = ((4, 5), (2, 6), [4, 5, 6])
        assert a.next_token_logprobs(*args) != b.next_token_logprobs(*args)

    def test_explicit_entries_override_seeded_rows(self, small_vocab):
        entries = {((4,), (2,), 5): -0.5}
        scorer = TableScorer(small_vocab, entries=entries, seed=11)
        assert scorer.next_token_logprobs((4,), (2,), [5]) == [-0.5]

    def test_batch_matches_single(self, small_vocab):
        scorer = TableScorer(small_vocab, seed=2)
        reqs = [((4,), (2,), [5, 6]), ((4, 5), (2, 6), [4])]
        batch = scorer.next_token_logprobs_batch(reqs)
        single = [scorer.next_token_logprobs(*r) for r in reqs]
        assert batch == single


class TestTableFixture:
    def test_roundtrip(self, tmp_path, small_vocab):
        v = small_vocab
        entries = {((4, 5), (2,), 6): -1.25, ((), (2, 4), 3): -0.5}
        path = tmp_path / "table.tsv"
        save_table_fixture(path, v, entries)
        scorer = load_table_fixture(path, v)
        assert scorer.entries == entries

    def test_comments_and_blank_lines_skipped(self, tmp_path, small_vocab):
        path = tmp_path / "table.tsv"
        path.write_text("# header\n\nw0\t<tgt>\tw1\t-1.5\n")
        scorer = load_table_fixture(path, small_vocab)
        assert scorer.entries == {((4,), (2,), 5): -1.5}

    def test_malformed_line_raises(self, tmp_path, small_vocab):
        path = tmp_path / "table.tsv"
        path.write_text("w0\t<tgt>\tw1\n")
        with pytest.raises(ValueError):
            load_table_fixture(path, small_vocab)


class TestPlantedScorer:
    def test_vocab_layout(self, pvocab):
        assert pvocab.id_of("s0") == 4
        assert pvocab.id_of("t0") == 12
        assert pvocab.size == 4 + 16

    def test_rows_normalize(self, planted, pvocab):
        row = planted.next_token_logprobs((4, 5), (2,),
                                          list(range(pvocab.size)))
        assert math.fsum(math.exp(x) for x in row) == pytest.approx(1.0)

    def test_translation_spike(self, planted, pvocab):
        # unmarked source s0 s1: the first generated token should be t0
        row = planted.next_token_logprobs((4, 5), (2,),
                                          list(range(pvocab.size)))
        assert int(np.argmax(row)) == planted.translate(4)

    def test_markers_penalized_for_unmarked_source(self, planted, pvocab):
        desired, open_lp, other = planted.next_token_logprobs(
            (4, 5), (2,), [planted.translate(4), pvocab.open_id, 5])
        assert open_lp < other < desired

    def test_greedy_decode_recovers_gold(self, pvocab):
        scorer = PlantedAlignmentScorer(pvocab, 8, seed=1)
        # source s0 [ s1 s2 ] s3 : expect t0 [ t1 t2 ] t3 </s>
        source = (4, 0, 5, 6, 1, 7)
        prefix = (pvocab.prefix_id,)
        expected = (12, 0, 13, 14, 1, 15, pvocab.eos_id)
        for tok in expected:
            row = scorer.next_token_logprobs(source, prefix,
                                             list(range(pvocab.size)))
            assert int(np.argmax(row)) == tok
            prefix = prefix + (tok,)

    def test_noise_free_before_marker(self, pvocab):
        clean = PlantedAlignmentScorer(pvocab, 8, seed=5, noise=0.0)
        noisy = PlantedAlignmentScorer(pvocab, 8, seed=5, noise=3.0)
        source = (4, 0, 5, 1, 6)
        ids = list(range(pvocab.size))
        # marker-free generated prefix: identical rows
        assert clean.next_token_logprobs(source, (2, 12), ids) == \
            noisy.next_token_logprobs(source, (2, 12), ids)
        # prefix containing a marker: perturbed rows
        assert clean.next_token_logprobs(source, (2, 12, 0), ids) != \
            noisy.next_token_logprobs(source, (2, 12, 0), ids)

    def test_noise_is_deterministic(self, pvocab):
        a = PlantedAlignmentScorer(pvocab, 8, seed=5, noise=2.0)
        b = PlantedAlignmentScorer(pvocab, 8, seed=5, noise=2.0)
        args = ((4, 0, 5, 1), (2, 12, 0), list(range(pvocab.size)))
        assert a.next_token_logprobs(*args) == b.next_token_logprobs(*args)

    def test_reverse_direction_spike(self, planted, pvocab):
        # conditioning on target words generates their source originals
        row = planted.next_token_logprobs((12, 13), (2,),
                                          list(range(pvocab.size)))
        assert int(np.argmax(row)) == 4


class TestPlantedSuite:
    def test_reproducible(self):
        v1, a = build_planted_suite(seed=9, count=4, n_range=(3, 6))
        v2, b = build_planted_suite(seed=9, count=4, n_range=(3, 6))
        assert v1 == v2
        assert [(x.plain, x.gold) for x in a] == [(y.plain, y.gold)
                                                 for y in b]

    def test_instance_consistency(self):
        vocab, insts = build_planted_suite(seed=9, count=6, n_range=(3, 6))
        for inst in insts:
            assert len(inst.template) == len(inst.plain)
            assert 0 <= inst.gold.open_gap < inst.gold.close_gap
            assert inst.gold.close_gap <= len(inst.plain)
            assert vocab.open_id in inst.marked.tokens

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_n_range_respected(self, seed):
        _, insts = build_planted_suite(seed=seed, count=3, n_range=(2, 5))
        assert all(2 <= len(i.plain) <= 5 for i in insts)
