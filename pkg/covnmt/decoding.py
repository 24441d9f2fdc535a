"""
Greedy and beam search with per-hypothesis coverage, plus UNK replacement
from the attention matrix.

Search runs against the Scorer protocol so any model exposing
begin/score/extend/coverage_norms/coverage_states can be decoded (NMTModel is one).
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Protocol, Sequence, Tuple, Union

import numpy as np
from pebble import ThreadPool

from .console import log_console
from .coverage import coverage_lines
from .errors import ConfigError, DataError
from .vocab import BOS, EOS, UNK, Vocabulary


class Scorer(Protocol):
    def begin(self, source_ids: Sequence[int]) -> Tuple[Any, Any]: ...

    def score(self, ctx: Any, state: Any, y_prev: int) -> Tuple[np.ndarray, np.ndarray, Any]: ...

    def extend(self, ctx: Any, pending: Any, y: int) -> Any: ...

    def coverage_norms(self, ctx: Any, state: Any) -> np.ndarray: ...

    def coverage_states(self, ctx: Any, state: Any) -> Tuple[Any, ...]: ...


@dataclass
class Hypothesis:
    tokens: List[int]
    log_prob: float
    state: Any
    attention: List[np.ndarray] = field(default_factory=list)
    step_log_probs: List[float] = field(default_factory=list)
    states: List[Any] = field(default_factory=list)  # model state after each step
    finished: bool = False
    greedy: bool = False     # follows the width-1 path

    @property
    def last(self) -> int:
        return self.tokens[-1] if self.tokens else BOS

    def emitted(self) -> List[int]:
        """Output tokens without the closing EOS"""
        return self.tokens[:-1] if self.finished else list(self.tokens)


@dataclass
class TranslationResult:
    tokens: List[int]
    attention: np.ndarray      # len(tokens) x l, rows renormalized in float64
    coverage_l1: np.ndarray    # final coverage L1 per source position
    log_prob: float
    finished: bool = True
    step_log_probs: List[float] = field(default_factory=list)    # every step, EOS included
    coverage_history: List[Tuple[Any, ...]] = field(default_factory=list)  # coverage states after each step

    def words(self, vocab: Vocabulary) -> List[str]:
        return vocab.decode(self.tokens)


def _normalized(score: float, length: int, length_norm: bool) -> float:
    return score / max(length, 1) if length_norm else score


def _result(model: Scorer, ctx, hyp: Hypothesis, source_length: int) -> TranslationResult:
    tokens = hyp.emitted()
    rows = hyp.attention[:len(tokens)]
    if rows:
        attention = np.asarray(rows, dtype=np.float64)
        attention = attention / attention.sum(axis=1, keepdims=True)
    else:
        attention = np.zeros((0, source_length))
    norms = np.asarray(model.coverage_norms(ctx, hyp.state), dtype=np.float64)
    history = [tuple(model.coverage_states(ctx, state)) for state in hyp.states]
    return TranslationResult(tokens, attention, norms, hyp.log_prob, hyp.finished, list(hyp.step_log_probs), history)


def _check(beam: int, max_len: int):
    if beam < 1:
        raise ConfigError(f"beam must be at least 1, got {beam}", field='beam')
    if max_len < 1:
        raise ConfigError(f"max_len must be at least 1, got {max_len}", field='max_len')


def greedy_decode(model: Scorer, source_ids: Sequence[int], max_len: int = 80) -> TranslationResult:
    """Argmax word at every step (ties to the lowest id) until EOS or max_len"""
    _check(1, max_len)
    ctx, state = model.begin(source_ids)
    hyp = Hypothesis([], 0.0, state, greedy=True)
    for _ in range(max_len):
        log_probs, alpha, pending = model.score(ctx, hyp.state, hyp.last)
        y = int(np.argmax(log_probs))
        hyp.state = model.extend(ctx, pending, y)
        hyp.states.append(hyp.state)
        hyp.tokens.append(y)
        hyp.attention.append(alpha)
        hyp.step_log_probs.append(float(log_probs[y]))
        hyp.log_prob += float(log_probs[y])
        if y == EOS:
            hyp.finished = True
            break
    return _result(model, ctx, hyp, len(source_ids))


def beam_decode(model: Scorer, source_ids: Sequence[int], beam: int = 5, max_len: int = 80,
                length_norm: bool = False) -> TranslationResult:
    """
    Length-capped beam search

    Each hypothesis owns its coverage through its model state. Candidates are
    ranked by (score, token sequence); the greedy continuation is kept in the
    beam even when it falls out of the top slots, so a wider beam never returns
    a less probable translation than width 1. Unfinished hypotheses alive at
    max_len are closed as they are.

    Returns:
        TranslationResult: best closed hypothesis; ties go to the earliest
        completion, then the lexicographically smallest id sequence
    """
    _check(beam, max_len)
    ctx, state = model.begin(source_ids)
    live = [Hypothesis([], 0.0, state, greedy=True)]
    done: List[Tuple[Hypothesis, int]] = []

    for step in range(1, max_len + 1):
        candidates = []
        for hyp in live:
            log_probs, alpha, pending = model.score(ctx, hyp.state, hyp.last)
            order = np.argsort(-log_probs, kind='stable')
            for rank, y in enumerate(order[:beam]):
                y = int(y)
                lp = float(log_probs[y])
                if not np.isfinite(lp):
                    continue
                candidates.append((hyp.log_prob + lp, hyp, y, lp, alpha, pending, hyp.greedy and rank == 0))

        candidates.sort(key=lambda c: (-_normalized(c[0], len(c[1].tokens) + 1, length_norm), c[1].tokens + [c[2]]))
        selected = candidates[:beam]
        if not any(c[6] for c in selected):
            anchor = [c for c in candidates if c[6]]
            if anchor:
                selected[-1] = anchor[0]

        live = []
        for score, parent, y, lp, alpha, pending, greedy in selected:
            state = model.extend(ctx, pending, y)
            hyp = Hypothesis(parent.tokens + [y], score, state, parent.attention + [alpha],
                             parent.step_log_probs + [lp], parent.states + [state],
                             finished=(y == EOS), greedy=greedy)
            if hyp.finished:
                done.append((hyp, step))
            else:
                live.append(hyp)

        if not length_norm and done and live:
            # scores only decrease, so nothing below the best closed hypothesis can overtake it
            best = max(h.log_prob for h, _ in done)
            live = [h for h in live if h.log_prob >= best or h.greedy]
        if not live:
            break

    for hyp in live:
        done.append((hyp, max_len + 1))
    if not done:
        # every continuation had zero probability
        log_console(f"beam search found no finite continuation for a source of length {len(source_ids)}", "WARNING")
        return _result(model, ctx, Hypothesis([], float('-inf'), state), len(source_ids))

    best, _ = min(done, key=lambda d: (-_normalized(d[0].log_prob, len(d[0].tokens), length_norm), d[1], d[0].tokens))
    return _result(model, ctx, best, len(source_ids))


def replace_unk(result: TranslationResult, source_tokens: Sequence[str], vocab: Vocabulary) -> List[str]:
    """Copy the most attended source word (lowest position on ties) over every UNK"""
    words = vocab.decode(result.tokens)
    for t, token_id in enumerate(result.tokens):
        if token_id == UNK and t < len(result.attention):
            words[t] = source_tokens[int(np.argmax(result.attention[t]))]
    return words


def translate_all(model: Scorer, sources: Sequence[Sequence[int]], beam: int = 5, max_len: int = 80,
                  length_norm: bool = False, workers: int = 1) -> List[TranslationResult]:
    """Decode every sentence; with workers > 1 sentences run on a thread pool, results in input order"""
    if workers <= 1 or len(sources) <= 1:
        return [beam_decode(model, source, beam, max_len, length_norm) for source in sources]

    pool = ThreadPool(max_workers=workers)
    try:
        futures = [pool.schedule(beam_decode, args=(model, source, beam, max_len, length_norm)) for source in sources]
        return [future.result() for future in futures]
    finally:
        pool.close()
        pool.join()


def write_attention_dump(results: Sequence[TranslationResult], path: Union[str, Path], first_id: int = 0):
    """Per sentence: 'sent <id> <l> <m>' then m rows of l probabilities"""
    with open(path, 'w', encoding='utf-8') as f:
        for k, result in enumerate(results):
            m, l = result.attention.shape
            f.write(f"sent {first_id + k} {l} {m}\n")
            for row in result.attention:
                f.write(' '.join(f"{p:.6f}" for p in row) + '\n')


def write_coverage_dumps(results: Sequence[TranslationResult], path: Union[str, Path], first_id: int = 0):
    """Per sentence: 'sent <id> <l> <steps>' then the coverage lines of its best hypothesis"""
    with open(path, 'w', encoding='utf-8') as f:
        for k, result in enumerate(results):
            steps = sum(1 for states in result.coverage_history if states)
            f.write(f"sent {first_id + k} {result.attention.shape[1]} {steps}\n")
            for line in coverage_lines(result.coverage_history):
                f.write(line + '\n')


def read_attention_dump(path: Union[str, Path]) -> List[np.ndarray]:
    matrices = []
    with open(path, 'r', encoding='utf-8') as f:
        lines = f.read().splitlines()
    n = 0
    while n < len(lines):
        header = lines[n].split()
        if len(header) != 4 or header[0] != 'sent':
            raise DataError(f"expected 'sent <id> <l> <m>', got '{lines[n]}'", path=path, line=n + 1)
        l, m = int(header[2]), int(header[3])
        if n + 1 + m > len(lines):
            raise DataError(f"sentence {header[1]} has fewer than {m} attention rows", path=path, line=len(lines))
        rows = [[float(v) for v in lines[n + 1 + t].split()] for t in range(m)]
        matrices.append(np.asarray(rows, dtype=np.float64).reshape(m, l))
        n += 1 + m
    return matrices
