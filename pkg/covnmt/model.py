"""
The coverage-augmented attention NMT model: parameters plus the step logic
shared by teacher-forced training and search.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .console import log_console
from .coverage import CoverageState, coverage_l1, init_states, step_all
from .decoder import AttentionRecord, DecoderState, attend, context, decode_step, initial_state, predict
from .encoder import EncodedSource, encode
from .errors import CheckpointError, VocabIndexError
from .params import CoverageMode, ModelParams, ModelShape, init_params
from .tensor import Tensor, log, no_grad, scale, stack, sum_all, take
from .vocab import BOS, EOS


@dataclass
class SentenceContext:
    source_ids: List[int]
    encoded: EncodedSource


@dataclass
class SearchState:
    decoder: DecoderState
    coverage: Tuple[CoverageState, ...]


@dataclass
class StepOutput:
    attention: AttentionRecord
    context: Tensor
    decoder: DecoderState
    probs: Tensor


@dataclass
class ForwardTrace:
    """Everything one teacher-forced pass produced"""
    nll: Tensor
    targets: List[int]
    coverage: List[Tuple[CoverageState, ...]] = field(default_factory=list)  # after steps 1..m
    attention: List[Tensor] = field(default_factory=list)
    predictions: List[int] = field(default_factory=list)

    @property
    def final_coverage(self) -> Tuple[CoverageState, ...]:
        return self.coverage[-1] if self.coverage else ()


class NMTModel:
    """Attention encoder-decoder with optional coverage embeddings"""

    def __init__(self, params: ModelParams, mode: Optional[CoverageMode] = None, max_len: Optional[int] = None):
        self.params = params
        self.shape: ModelShape = params.infer_shape()
        if mode is not None and CoverageMode(mode) != self.shape.mode:
            raise CheckpointError(f"parameters belong to a '{self.shape.mode.value}' model, not '{CoverageMode(mode).value}'")
        self.mode = self.shape.mode
        self.max_len = max_len

    @classmethod
    def create(cls, shape: ModelShape, seed: int = 1234, max_len: Optional[int] = None) -> 'NMTModel':
        return cls(init_params(shape, seed), max_len=max_len)

    # ====== STEP LOGIC ======

    def begin(self, source_ids: Sequence[int]) -> Tuple[SentenceContext, SearchState]:
        source_ids = [int(i) for i in source_ids]
        encoded = encode(self.params, source_ids, self.max_len)
        state = SearchState(initial_state(self.params, encoded), init_states(self.params, self.mode, source_ids))
        return SentenceContext(source_ids, encoded), state

    def run_step(self, ctx: SentenceContext, state: SearchState, y_prev: int) -> StepOutput:
        record = attend(self.params, state.decoder, ctx.encoded, y_prev, state.coverage, self.mode)
        H = context(record.probs, ctx.encoded)
        decoder = decode_step(self.params, state.decoder, y_prev, H)
        return StepOutput(record, H, decoder, predict(self.params, decoder, y_prev))

    def advance(self, step: StepOutput, coverage: Tuple[CoverageState, ...], y: int) -> SearchState:
        return SearchState(step.decoder, step_all(self.params, self.mode, coverage, y, step.attention.probs))

    # ====== TEACHER FORCING ======

    def teacher_forced(self, source_ids: Sequence[int], target_ids: Sequence[int]) -> ForwardTrace:
        """-sum_t log p(y*_t) with EOS appended, coverage advanced with the reference words"""
        targets = [int(y) for y in target_ids] + [EOS]
        for y in targets:
            if y < 0 or y >= self.shape.tgt_vocab:
                raise VocabIndexError(y, self.shape.tgt_vocab)

        ctx, state = self.begin(source_ids)
        trace = ForwardTrace(nll=None, targets=targets)
        log_probs = []
        smallest = 1.0
        y_prev = BOS
        for y in targets:
            step = self.run_step(ctx, state, y_prev)
            p = take(step.probs, y)
            smallest = min(smallest, float(p.data))
            log_probs.append(log(p))
            state = self.advance(step, state.coverage, y)
            trace.coverage.append(state.coverage)
            trace.attention.append(step.attention.probs)
            trace.predictions.append(int(np.argmax(step.probs.data)))
            y_prev = y

        if smallest <= 0.0:
            log_console(f"reference word has zero probability; log-likelihood clipped (source length {len(ctx.source_ids)})", "WARNING")
        trace.nll = scale(sum_all(stack(log_probs)), -1.0)
        return trace

    # ====== SEARCH INTERFACE ======

    def score(self, ctx: SentenceContext, state: SearchState, y_prev: int):
        """Log-probabilities of the next word, the attention row, and the pending step"""
        with no_grad():
            step = self.run_step(ctx, state, y_prev)
        probs = step.probs.data.astype(np.float64)
        log_probs = np.log(np.maximum(probs, np.finfo(np.float64).tiny))
        alpha = step.attention.probs.data.astype(np.float64)
        return log_probs, alpha, (step, state.coverage)

    def extend(self, ctx: SentenceContext, pending, y: int) -> SearchState:
        step, coverage = pending
        with no_grad():
            return self.advance(step, coverage, y)

    def coverage_norms(self, ctx: SentenceContext, state: SearchState) -> np.ndarray:
        """Final coverage L1 per source position, summed over rules"""
        if not state.coverage:
            return np.zeros(len(ctx.source_ids))
        return np.sum([coverage_l1(c) for c in state.coverage], axis=0)

    def coverage_states(self, ctx: SentenceContext, state: SearchState) -> Tuple[CoverageState, ...]:
        return state.coverage
