"""
Vocabularies and embedding tables.
"""
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

from .errors import DataError, EmptyInputError, VocabIndexError
from .tensor import Tensor, gather_rows, take

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED = ['<pad>', '<unk>', '<s>', '</s>']

# Uniform init range for every embedding table
INIT_SCALE = 0.08


class Vocabulary:
    """Token <-> id mapping with PAD/UNK/BOS/EOS at ids 0..3"""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tokens[:len(RESERVED)] != RESERVED:
            raise DataError(f"vocabulary must start with the reserved tokens {RESERVED}")
        self.tokens: List[str] = tokens
        self.index: Dict[str, int] = {}
        for i, token in enumerate(tokens):
            if token in self.index:
                raise DataError(f"duplicate token '{token}'", line=i)
            self.index[token] = i

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id(self, token: str) -> int:
        return self.index.get(token, UNK)

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def encode(self, tokens: Iterable[str]) -> List[int]:
        return [self.id(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> List[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path: Union[str, Path]):
        """Write one token per line; line number is the id"""
        with open(path, 'w', encoding='utf-8') as f:
            for token in self.tokens:
                f.write(token + '\n')

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'Vocabulary':
        with open(path, 'r', encoding='utf-8') as f:
            tokens = [line.rstrip('\n') for line in f]
        if len(tokens) < len(RESERVED):
            raise DataError("vocabulary file is missing the reserved tokens", path=path)
        return cls(tokens)


def build_vocab(corpus: Iterable[Sequence[str]], max_size: int) -> Vocabulary:
    """
    Keep the max_size - 4 most frequent tokens

    Ties in frequency are broken by first occurrence in the stream.
    """
    counts = Counter()
    first_seen = {}
    for sentence in corpus:
        for token in sentence:
            if token not in first_seen:
                first_seen[token] = len(first_seen)
            counts[token] += 1
    if not counts:
        raise EmptyInputError("cannot build a vocabulary from an empty corpus")

    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    ranked = [t for t in ranked if t not in RESERVED]
    keep = max(max_size - len(RESERVED), 0)
    return Vocabulary(RESERVED + ranked[:keep])


@dataclass
class EmbeddingTable:
    """V x d matrix, one row per vocabulary entry"""
    matrix: Tensor

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def width(self) -> int:
        return self.matrix.shape[1]


def lookup(table: EmbeddingTable, ids: Sequence[int]) -> Tensor:
    return gather_rows(table.matrix, ids)


def embed_one(table: EmbeddingTable, token_id: int) -> Tensor:
    """Single row of a table as a vector"""
    if token_id < 0 or token_id >= table.size:
        raise VocabIndexError(int(token_id), table.size)
    return take(table.matrix, int(token_id))
