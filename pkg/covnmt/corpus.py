"""
Corpus files: tokenized parallel text, Pharaoh alignments, synthetic tasks.
"""
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .errors import ConfigError, DataError, EmptyInputError
from .training import TrainingExample
from .vocab import Vocabulary

Links = Set[Tuple[int, int]]
TASKS = ('copy', 'reverse', 'fertility')


def read_sentences(path: Union[str, Path], allow_empty: bool = False) -> List[List[str]]:
    """One tokenized sentence per line, single-space separated"""
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", path=path)
    sentences = []
    with open(path, 'r', encoding='utf-8') as f:
        for n, line in enumerate(f, start=1):
            tokens = line.split()
            if not tokens and not allow_empty:
                raise EmptyInputError("empty sentence", path=path, line=n)
            sentences.append(tokens)
    return sentences


def write_sentences(sentences: Iterable[Sequence[str]], path: Union[str, Path]):
    with open(path, 'w', encoding='utf-8') as f:
        for tokens in sentences:
            f.write(' '.join(tokens) + '\n')


def parse_links(line: str, path=None, line_no=None) -> Links:
    links = set()
    for item in line.split():
        try:
            i, j = item.split('-')
            links.add((int(i), int(j)))
        except ValueError:
            raise DataError(f"malformed alignment link '{item}'", path=path, line=line_no) from None
    return links


def read_alignments(path: Union[str, Path]) -> List[Links]:
    """Pharaoh i-j pairs, source index first, 0-based"""
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", path=path)
    with open(path, 'r', encoding='utf-8') as f:
        return [parse_links(line, path, n) for n, line in enumerate(f, start=1)]


def format_links(links: Iterable[Tuple[int, int]]) -> str:
    return ' '.join(f"{i}-{j}" for i, j in sorted(links))


def write_alignments(alignments: Iterable[Iterable[Tuple[int, int]]], path: Union[str, Path]):
    with open(path, 'w', encoding='utf-8') as f:
        for links in alignments:
            f.write(format_links(links) + '\n')


def check_parallel(first: Sequence, second: Sequence, first_path, second_path):
    if len(first) != len(second):
        shorter = min(len(first), len(second))
        raise DataError(f"{first_path} has {len(first)} lines but {second_path} has {len(second)}",
                        path=second_path if len(second) > shorter else first_path, line=shorter + 1)


def read_parallel(src_path, tgt_path, align_path=None):
    """Line-aligned source/target sentences and optional gold links"""
    sources = read_sentences(src_path)
    targets = read_sentences(tgt_path)
    check_parallel(sources, targets, src_path, tgt_path)
    alignments = None
    if align_path is not None:
        alignments = read_alignments(align_path)
        check_parallel(sources, alignments, src_path, align_path)
        for n, (src, tgt, links) in enumerate(zip(sources, targets, alignments), start=1):
            for i, j in links:
                if not (0 <= i < len(src)) or not (0 <= j < len(tgt)):
                    raise DataError(f"link {i}-{j} outside a {len(src)}x{len(tgt)} sentence pair", path=align_path, line=n)
    return sources, targets, alignments


def to_examples(sources: Sequence[Sequence[str]], targets: Sequence[Sequence[str]],
                alignments: Optional[Sequence[Links]], src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> List[TrainingExample]:
    examples = []
    for n, (src, tgt) in enumerate(zip(sources, targets)):
        links = sorted(alignments[n]) if alignments is not None else None
        examples.append(TrainingExample(src_vocab.encode(src), tgt_vocab.encode(tgt), links))
    return examples


# ====== SYNTHETIC TASKS ======

def synthetic_pair(task: str, source: List[str]) -> Tuple[List[str], Links]:
    """Target sentence and gold links for one source sentence"""
    if task == 'copy':
        return list(source), {(i, i) for i in range(len(source))}
    if task == 'reverse':
        l = len(source)
        return source[::-1], {(i, l - 1 - i) for i in range(l)}
    if task == 'fertility':
        # even token ids produce two target words, odd ids one
        target, links = [], set()
        for i, token in enumerate(source):
            if int(token[1:]) % 2 == 0:
                links.update({(i, len(target)), (i, len(target) + 1)})
                target.extend([f"{token}_1", f"{token}_2"])
            else:
                links.add((i, len(target)))
                target.append(token)
        return target, links
    raise ConfigError(f"unknown task '{task}', expected one of {TASKS}", field='task')


def gen_synthetic(task: str, size: int, vocab: int, seed: int, min_len: int = 5, max_len: int = 12):
    """
    Generate a parallel toy corpus

    Args:
        task (str): copy, reverse or fertility
        size (int): number of sentence pairs
        vocab (int): number of distinct source words w0..w{vocab-1}
        seed (int): generator seed
        min_len, max_len (int): inclusive source length range

    Returns:
        tuple: (sources, targets, alignments)
    """
    if task not in TASKS:
        raise ConfigError(f"unknown task '{task}', expected one of {TASKS}", field='task')
    if size < 1:
        raise ConfigError("size must be at least 1", field='size')
    if vocab < 1:
        raise ConfigError("vocabulary must have at least one word", field='synthetic_vocab')
    if not (1 <= min_len <= max_len):
        raise ConfigError(f"invalid length range {min_len}..{max_len}", field='min_len')

    rng = np.random.default_rng(seed)
    sources, targets, alignments = [], [], []
    for _ in range(size):
        length = int(rng.integers(min_len, max_len + 1))
        source = [f"w{int(k)}" for k in rng.integers(0, vocab, size=length)]
        target, links = synthetic_pair(task, source)
        sources.append(source)
        targets.append(target)
        alignments.append(links)
    return sources, targets, alignments


def write_corpus(prefix: Union[str, Path], sources, targets, alignments) -> Tuple[Path, Path, Path]:
    """prefix.src, prefix.tgt, prefix.align"""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = (prefix.with_name(prefix.name + '.src'), prefix.with_name(prefix.name + '.tgt'),
             prefix.with_name(prefix.name + '.align'))
    write_sentences(sources, paths[0])
    write_sentences(targets, paths[1])
    write_alignments(alignments, paths[2])
    return paths
