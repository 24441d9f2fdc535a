"""
Vocabulary construction, persistence and embedding lookup.
"""
import numpy as np
import pytest

from covnmt.errors import DataError, EmptyInputError, VocabIndexError
from covnmt.tensor import Tape, parameter, sum_all
from covnmt.vocab import BOS, EOS, PAD, RESERVED, UNK, EmbeddingTable, Vocabulary, build_vocab, embed_one, lookup


def test_reserved_ids():
    vocab = build_vocab([['a']], 10)
    assert [vocab.id(t) for t in RESERVED] == [PAD, UNK, BOS, EOS]
    assert vocab.id('a') == 4


def test_frequency_order_with_first_occurrence_ties():
    corpus = [['b', 'a', 'c'], ['c', 'a', 'd']]
    vocab = build_vocab(corpus, 100)
    assert vocab.tokens[4:] == ['a', 'c', 'b', 'd']


def test_max_size_truncates_rare_words():
    vocab = build_vocab([['x', 'x', 'y', 'z']], 5)
    assert len(vocab) == 5
    assert 'x' in vocab and 'y' not in vocab
    assert vocab.encode(['x', 'y']) == [4, UNK]


def test_empty_corpus():
    with pytest.raises(EmptyInputError):
        build_vocab([[], []], 10)


def test_missing_reserved_prefix():
    with pytest.raises(DataError):
        Vocabulary(['a', 'b'])


def test_duplicate_token():
    with pytest.raises(DataError):
        Vocabulary(RESERVED + ['a', 'a'])


def test_save_and_load(tmp_path):
    vocab = build_vocab([['der', 'hund'], ['die', 'katze', 'der']], 100)
    vocab.save(tmp_path / 'src.vocab')
    assert Vocabulary.load(tmp_path / 'src.vocab') == vocab
    assert vocab.decode(vocab.encode(['die', 'hund'])) == ['die', 'hund']


def test_lookup_rows():
    table = EmbeddingTable(parameter(np.arange(12.0).reshape(6, 2)))
    rows = lookup(table, [5, 0, 5])
    assert np.allclose(rows.data, [[10, 11], [0, 1], [10, 11]])
    assert table.size == 6 and table.width == 2


def test_lookup_out_of_range():
    table = EmbeddingTable(parameter(np.zeros((6, 2))))
    with pytest.raises(VocabIndexError) as info:
        embed_one(table, 6)
    assert 'id 6' in str(info.value)


def test_embed_one_gradient_touches_one_row(wide):
    table = EmbeddingTable(parameter(np.ones((5, 3))))
    with Tape() as tape:
        loss = sum_all(embed_one(table, 2))
    tape.backward(loss)
    expected = np.zeros((5, 3))
    expected[2] = 1.0
    assert np.array_equal(table.matrix.grad, expected)
