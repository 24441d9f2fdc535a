"""
Diagnostics for translations: attention alignments, alignment F1,
repeated phrases, BLEU and token accuracy.
"""
import collections
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, List, Sequence, Set, Tuple

import numpy as np

from .console import log_console
from .errors import ConfigError, DataError, EmptyInputError

ALIGN_THRESHOLD = 0.2
ROW_SUM_TOLERANCE = 1e-3

Link = Tuple[int, int]


def extract_alignment(attention, threshold: float = ALIGN_THRESHOLD) -> Set[Link]:
    """
    One link (j*, t) per target step t whose strongest source position j*
    has weight strictly above threshold. Ties go to the lowest j.
    """
    matrix = np.asarray(attention, dtype=np.float64)
    if matrix.size == 0:
        return set()
    if matrix.ndim != 2:
        raise DataError(f"attention must be a matrix, got shape {matrix.shape}")
    links = set()
    for t, row in enumerate(matrix):
        total = row.sum()
        if abs(total - 1.0) > ROW_SUM_TOLERANCE:
            log_console(f"attention row {t} sums to {total:.6f}, not 1", "WARNING")
        j = int(np.argmax(row))  # first maximum
        if row[j] > threshold:
            links.add((j, t))
    return links


def alignment_counts(predicted: Iterable[Link], gold: Iterable[Link]) -> Tuple[int, int, int]:
    predicted, gold = set(predicted), set(gold)
    return len(predicted & gold), len(predicted), len(gold)


def prf(hits: int, n_pred: int, n_gold: int) -> Tuple[float, float, float]:
    if n_pred == 0:
        precision = 1.0 if n_gold == 0 else 0.0
    else:
        precision = hits / n_pred
    if n_gold == 0:
        recall = 1.0 if n_pred == 0 else 0.0
    else:
        recall = hits / n_gold
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def alignment_f1(predicted: Iterable[Link], gold: Iterable[Link]) -> Tuple[float, float, float]:
    """(precision, recall, F1); empty/empty counts as perfect, empty/nonempty as zero"""
    return prf(*alignment_counts(predicted, gold))


def corpus_alignment_f1(predicted: Sequence[Iterable[Link]], gold: Sequence[Iterable[Link]]) -> Tuple[float, float, float]:
    """Micro average: link counts summed over sentences"""
    if len(predicted) != len(gold):
        raise DataError(f"{len(predicted)} predicted alignments for {len(gold)} gold ones",
                        line=min(len(predicted), len(gold)) + 1)
    hits = n_pred = n_gold = 0
    for pred, ref in zip(predicted, gold):
        h, p, g = alignment_counts(pred, ref)
        hits, n_pred, n_gold = hits + h, n_pred + p, n_gold + g
    return prf(hits, n_pred, n_gold)


def repetition_count(tokens: Sequence[Hashable], min_len: int = 4) -> int:
    """Start positions whose min_len-gram already started at an earlier position"""
    if min_len < 1:
        raise ConfigError("min_len must be at least 1", field='min_len')
    seen = set()
    repeats = 0
    for p in range(len(tokens) - min_len + 1):
        gram = tuple(tokens[p:p + min_len])
        if gram in seen:
            repeats += 1
        else:
            seen.add(gram)
    return repeats


# ====== BLEU ======

def ngrams(seg: Sequence[str], n: int) -> collections.Counter:
    c = collections.Counter()
    for i in range(len(seg) - n + 1):
        c[tuple(seg[i:i + n])] += 1
    return c


def count(candidate: Sequence[str], reference: Sequence[str], n: int = 4) -> collections.Counter:
    """Clipped match and guess counts for one segment pair"""
    stats = collections.Counter()
    for i in range(1, n + 1):
        guess = ngrams(candidate, i)
        stats['guess', i] += sum(guess.values())
        stats['match', i] += sum((guess & ngrams(reference, i)).values())
    stats['hyplen'] += len(candidate)
    stats['reflen'] += len(reference)
    return stats


@dataclass
class BleuStats:
    bleu: float
    brevity_penalty: float
    precisions: List[float]
    hyp_len: int
    ref_len: int


def bleu_stats(candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]], n: int = 4) -> BleuStats:
    if not candidates:
        raise EmptyInputError("BLEU over an empty corpus")
    if len(candidates) != len(references):
        raise DataError(f"{len(candidates)} candidates for {len(references)} references",
                        line=min(len(candidates), len(references)) + 1)
    c = collections.Counter()
    for t, r in zip(candidates, references):
        c += count(t, r, n=n)

    precisions = [c['match', i] / c['guess', i] if c['guess', i] > 0 else 0.0 for i in range(1, n + 1)]
    hyp_len, ref_len = c['hyplen'], c['reflen']
    if hyp_len == 0:
        bp = 0.0
    elif hyp_len < ref_len:
        bp = math.exp(1 - ref_len / hyp_len)
    else:
        bp = 1.0
    if min(precisions) == 0.0:
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / n)
    return BleuStats(score, bp, precisions, hyp_len, ref_len)


def bleu4(candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]]) -> float:
    return bleu_stats(candidates, references, 4).bleu


def token_accuracy(predicted: Sequence[Sequence[str]], references: Sequence[Sequence[str]]) -> float:
    """Position-wise matches over reference tokens; missing positions count as errors"""
    if not references:
        raise EmptyInputError("accuracy over an empty corpus")
    if len(predicted) != len(references):
        raise DataError(f"{len(predicted)} predictions for {len(references)} references",
                        line=min(len(predicted), len(references)) + 1)
    hits = total = 0
    for pred, ref in zip(predicted, references):
        hits += sum(int(p == r) for p, r in zip(pred, ref))
        total += max(len(ref), len(pred))
    return hits / total if total else 1.0
