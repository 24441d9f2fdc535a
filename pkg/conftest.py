"""
Shared fixtures: tiny shapes, wide precision, small synthetic corpora.
"""
import numpy as np
import pytest

from covnmt.corpus import gen_synthetic, to_examples, write_corpus
from covnmt.model import NMTModel
from covnmt.params import CoverageMode, ModelShape
from covnmt.tensor import precision
from covnmt.vocab import build_vocab

MODES = [mode.value for mode in CoverageMode]


@pytest.fixture
def wide():
    """Float64 tensors for the duration of a test"""
    with precision('wide'):
        yield


def tiny_shape(mode='base', src_vocab=8, tgt_vocab=8, width=4, d_c=3) -> ModelShape:
    return ModelShape(src_vocab, tgt_vocab, d_emb=width, d_h=width, d_att=width, d_out=width, d_c=d_c,
                      mode=CoverageMode(mode))


@pytest.fixture
def make_model():
    def factory(mode='base', seed=7, **kwargs) -> NMTModel:
        return NMTModel.create(tiny_shape(mode, **kwargs), seed=seed)
    return factory


@pytest.fixture
def copy_corpus():
    """(examples, src_vocab, tgt_vocab) for a 12-pair copy task over 5 words"""
    sources, targets, links = gen_synthetic('copy', 12, 5, seed=3, min_len=3, max_len=5)
    src_vocab = build_vocab(sources, 100)
    tgt_vocab = build_vocab(targets, 100)
    return to_examples(sources, targets, links, src_vocab, tgt_vocab), src_vocab, tgt_vocab


@pytest.fixture
def corpus_files(tmp_path):
    """Train and dev copy corpora on disk, returned as a dict of paths"""
    train = write_corpus(tmp_path / 'data' / 'train', *gen_synthetic('copy', 10, 5, seed=1, min_len=3, max_len=5))
    dev = write_corpus(tmp_path / 'data' / 'dev', *gen_synthetic('copy', 4, 5, seed=2, min_len=3, max_len=5))
    return {
        'train_src': train[0], 'train_tgt': train[1], 'train_align': train[2],
        'dev_src': dev[0], 'dev_tgt': dev[1], 'dev_align': dev[2],
    }


def random_sentence(rng: np.random.Generator, vocab_size: int, low: int = 2, high: int = 5):
    """Ids from the non-reserved range"""
    return [int(k) for k in rng.integers(4, vocab_size, size=int(rng.integers(low, high + 1)))]
