"""
One decoding step of the attention decoder.

attend   -> A = tanh(s W_s + h W_h + emb(y) W_y + sum_k c^(k) W_c^(k)), e = A w_e, alpha = softmax(e)
context  -> H = sum_i alpha_i h_i
decode_step -> s_t = GRU([emb(y_prev); H], s_{t-1})
predict  -> o = tanh(s W_o + emb(y_prev) W_oy), p = softmax(o W_v)
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coverage import CoverageState, check_states
from .encoder import EncodedSource, gru_cell
from .errors import DimensionError
from .params import CoverageMode, ModelParams
from .tensor import Tensor, add, concat, masked_softmax, matmul, reshape, take, tanh
from .vocab import embed_one

COVERAGE_PROJECTIONS = {'gru': 'att.W_c_gru', 'sub': 'att.W_c_sub'}


@dataclass
class AttentionRecord:
    pre_activation: Tensor  # l x d_att
    logits: Tensor          # l
    probs: Tensor           # l


@dataclass
class DecoderState:
    s: Tensor


def initial_state(params: ModelParams, enc: EncodedSource) -> DecoderState:
    """s_0 = tanh(backward encoder state at the first real position @ W_init)"""
    d_h = params['enc_fwd.U'].shape[0]
    first = int(np.flatnonzero(enc.mask)[0])
    backward_first = take(enc.states, (first, slice(0, d_h)))
    return DecoderState(tanh(matmul(backward_first, params['dec_init.W'])))


def attend(params: ModelParams, s_prev: DecoderState, enc: EncodedSource, y_prev_id: int,
           coverage: Sequence[CoverageState], mode: CoverageMode) -> AttentionRecord:
    check_states(mode, coverage)
    y = embed_one(params.table('tgt_embed'), y_prev_id)
    query = add(matmul(s_prev.s, params['att.W_s']), matmul(y, params['att.W_y']))
    pre = add(matmul(enc.states, params['att.W_h']), query)
    for state in coverage:
        if state.length != enc.length:
            raise DimensionError("coverage rows differ from source length", state.matrix.shape, enc.states.shape)
        pre = add(pre, matmul(state.matrix, params[COVERAGE_PROJECTIONS[state.rule]]))
    activation = tanh(pre)
    logits = reshape(matmul(activation, params['att.w_e']), (enc.length,))
    return AttentionRecord(activation, logits, masked_softmax(logits, enc.mask))


def context(probs: Tensor, enc: EncodedSource) -> Tensor:
    if probs.shape != (enc.length,):
        raise DimensionError("attention length differs from source length", probs.shape, enc.states.shape)
    return matmul(probs, enc.states)


def decode_step(params: ModelParams, s_prev: DecoderState, y_prev_id: int, H: Tensor) -> DecoderState:
    y = embed_one(params.table('tgt_embed'), y_prev_id)
    return DecoderState(gru_cell(params.gru('dec'), concat([y, H]), s_prev.s))


def predict(params: ModelParams, state: DecoderState, y_prev_id: int) -> Tensor:
    """Distribution over the target vocabulary"""
    y = embed_one(params.table('tgt_embed'), y_prev_id)
    hidden = tanh(add(matmul(state.s, params['out.W_o']), matmul(y, params['out.W_oy'])))
    return masked_softmax(matmul(hidden, params['out.W_v']))
