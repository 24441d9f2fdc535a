"""
Alignment extraction and F1, repeated phrases, BLEU, token accuracy.
"""
import math

import numpy as np
import pytest

from covnmt.errors import ConfigError, DataError, EmptyInputError
from covnmt.evaluation import (
    alignment_f1, bleu4, bleu_stats, corpus_alignment_f1, extract_alignment, repetition_count, token_accuracy,
)


# ====== ALIGNMENTS ======

def test_row_below_threshold_gives_no_link():
    row = [0.19, 0.18, 0.17, 0.16, 0.15, 0.15]
    assert extract_alignment([row]) == set()


def test_one_hot_row():
    assert extract_alignment([[0.0, 0.0, 1.0]]) == {(2, 0)}


def test_ties_go_to_the_lowest_position():
    assert extract_alignment([[0.5, 0.5], [0.1, 0.9]], 0.2) == {(0, 0), (1, 1)}


def test_threshold_is_strict():
    assert extract_alignment([[0.2, 0.2, 0.2, 0.2, 0.2]]) == set()


def test_at_most_one_link_per_step():
    rng = np.random.default_rng(0)
    attention = rng.dirichlet(np.ones(5), size=7)
    links = extract_alignment(attention)
    assert len(links) <= 7
    assert len({t for _, t in links}) == len(links)


def test_malformed_rows_are_still_used():
    assert extract_alignment([[0.9, 0.9]]) == {(0, 0)}


def test_f1_examples():
    assert alignment_f1({(1, 1), (2, 2)}, {(1, 1), (2, 3)}) == (0.5, 0.5, 0.5)
    assert alignment_f1(set(), {(0, 0)}) == (0.0, 0.0, 0.0)
    assert alignment_f1(set(), set()) == (1.0, 1.0, 1.0)


def test_f1_is_symmetric():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = {tuple(x) for x in rng.integers(0, 4, size=(int(rng.integers(0, 6)), 2)).tolist()}
        b = {tuple(x) for x in rng.integers(0, 4, size=(int(rng.integers(0, 6)), 2)).tolist()}
        assert alignment_f1(a, b)[2] == pytest.approx(alignment_f1(b, a)[2])


def test_corpus_f1_sums_link_counts():
    predicted = [{(0, 0), (1, 1)}, {(0, 0)}]
    gold = [{(0, 0), (1, 1)}, {(1, 0), (1, 1)}]
    precision, recall, f1 = corpus_alignment_f1(predicted, gold)
    assert (precision, recall) == (2 / 3, 2 / 4)
    assert f1 == pytest.approx(2 * (2 / 3) * 0.5 / (2 / 3 + 0.5))
    with pytest.raises(DataError):
        corpus_alignment_f1(predicted, gold[:1])


# ====== REPETITION ======

def test_repetition_examples():
    assert repetition_count('a b c d e'.split()) == 0
    assert repetition_count('a b c d a b c d'.split()) == 1
    assert repetition_count('a a a a a a a a'.split()) == 4
    assert repetition_count('a b'.split()) == 0


def test_repetition_min_len():
    assert repetition_count('a b a b'.split(), min_len=2) == 1
    with pytest.raises(ConfigError):
        repetition_count(['a'], min_len=0)


def scan(tokens, k):
    return sum(
        1 for p in range(len(tokens) - k + 1)
        if any(tokens[q:q + k] == tokens[p:p + k] for q in range(p))
    )


def test_repetition_matches_exhaustive_scan():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        tokens = [str(x) for x in rng.integers(0, 3, size=int(rng.integers(0, 21)))]
        assert repetition_count(tokens) == scan(tokens, 4)


def test_repetition_ignores_token_names():
    tokens = 'x y z x y z x y z'.split()
    renamed = [{'x': 'p', 'y': 'q', 'z': 'x'}[t] for t in tokens]
    assert repetition_count(tokens, 3) == repetition_count(renamed, 3) == 4


# ====== BLEU AND ACCURACY ======

def test_bleu_of_corpus_against_itself():
    corpus = ['the cat sat on the mat'.split(), 'a b c d e'.split()]
    assert bleu4(corpus, corpus) == 1.0


def test_bleu_without_four_gram_matches():
    assert bleu4([['a', 'b', 'c', 'd']], [['a', 'b', 'c', 'x']]) == 0.0


def test_bleu_short_candidate_pays_brevity_penalty():
    stats = bleu_stats(['the cat sat on the'.split()], ['the cat sat on the mat'.split()])
    assert stats.precisions == [1.0, 1.0, 1.0, 1.0]
    assert stats.brevity_penalty == pytest.approx(math.exp(1 - 6 / 5))
    assert stats.bleu == pytest.approx(math.exp(1 - 6 / 5))


def test_bleu_clips_repeated_words():
    stats = bleu_stats([['the'] * 4], [['the', 'cat', 'the', 'mat']])
    assert stats.precisions[0] == 0.5


def test_bleu_input_errors():
    with pytest.raises(EmptyInputError):
        bleu4([], [])
    with pytest.raises(DataError):
        bleu4([['a']], [['a'], ['b']])


def test_token_accuracy_counts_missing_positions():
    assert token_accuracy([['a', 'b']], [['a', 'b']]) == 1.0
    assert token_accuracy([['a', 'x', 'c']], [['a', 'b', 'c', 'd']]) == 0.5
    assert token_accuracy([['a', 'b', 'c', 'd']], [['a', 'b']]) == 0.5
    with pytest.raises(EmptyInputError):
        token_accuracy([], [])
