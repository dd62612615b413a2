import numpy as np
import pytest

from codec import (
    LabeledSpan,
    SearchInput,
    TableScorer,
    Template,
    Vocabulary,
    insert_markers,
)

CONTENT = [f"w{i}" for i in range(8)]


def random_table_input(seed: int, n_max: int = 12) -> SearchInput:
    """One random-table single-span instance with n <= n_max."""
    vocab = Vocabulary.build(CONTENT)
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, n_max + 1))
    src = tuple(int(rng.integers(0, len(CONTENT))) + 4 for _ in range(n))
    o = int(rng.integers(0, n))
    c = int(rng.integers(o + 1, n + 1))
    marked = insert_markers(vocab, src, LabeledSpan(o, c, "SPAN"))
    template = Template(tuple(int(rng.integers(0, len(CONTENT))) + 4
                              for _ in range(n)))
    scorer = TableScorer(vocab, seed=seed)
    return SearchInput(source_marked=marked, template=template,
                       prefix=vocab.prefix_id, scorer=scorer,
                       vocabulary=vocab)


@pytest.fixture
def small_vocab() -> Vocabulary:
    return Vocabulary.build(CONTENT)
