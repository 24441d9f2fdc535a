"""
Bidirectional GRU encoder: h_i = [backward state at i; forward state at i].
"""
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import DataError, DimensionError, EmptyInputError
from .params import ModelParams
from .tensor import Tensor, add, concat, matmul, mul, one_minus, put_rows, sigmoid, stack, take, tanh, zeros
from .vocab import PAD, lookup


@dataclass
class EncodedSource:
    states: Tensor      # l x 2d_h
    mask: np.ndarray    # True at real tokens

    @property
    def length(self) -> int:
        return self.states.shape[0]


def gru_cell(cell: Dict[str, Tensor], x: Tensor, h_prev: Tensor) -> Tensor:
    """Standard GRU step: h' = (1 - z) * h + z * tanh(x W + (r * h) U)"""
    if x.shape[-1] != cell['W_z'].shape[0] or h_prev.shape[-1] != cell['U_z'].shape[0]:
        raise DimensionError("GRU input widths do not match the cell", x.shape, h_prev.shape, cell['W_z'].shape)
    z = sigmoid(add(matmul(x, cell['W_z']), matmul(h_prev, cell['U_z'])))
    r = sigmoid(add(matmul(x, cell['W_r']), matmul(h_prev, cell['U_r'])))
    candidate = tanh(add(matmul(x, cell['W']), matmul(mul(r, h_prev), cell['U'])))
    return add(mul(one_minus(z), h_prev), mul(z, candidate))


def encode(params: ModelParams, source_ids: Sequence[int], max_len: Optional[int] = None) -> EncodedSource:
    """
    Run both directional sweeps from a zero state over the real tokens

    PAD positions get all-zero rows and a False mask entry.
    """
    ids = np.asarray(source_ids, dtype=np.int64).reshape(-1)
    if ids.size == 0:
        raise EmptyInputError("cannot encode an empty sentence")
    if max_len is not None and ids.size > max_len:
        raise DataError(f"sentence of length {ids.size} exceeds max length {max_len}")
    mask = ids != PAD
    positions = np.flatnonzero(mask)
    if positions.size == 0:
        raise EmptyInputError("sentence contains only padding")

    embedded = lookup(params.table('src_embed'), ids[positions])
    forward_cell, backward_cell = params.gru('enc_fwd'), params.gru('enc_bwd')
    d_h = forward_cell['U'].shape[0]
    n = positions.size

    forward = []
    h = zeros((d_h,))
    for k in range(n):
        h = gru_cell(forward_cell, take(embedded, k), h)
        forward.append(h)

    backward = [None] * n
    h = zeros((d_h,))
    for k in reversed(range(n)):
        h = gru_cell(backward_cell, take(embedded, k), h)
        backward[k] = h

    real = stack([concat([backward[k], forward[k]]) for k in range(n)])
    if n == ids.size:
        states = real
    else:
        states = put_rows(zeros((ids.size, 2 * d_h)), positions, real)
    return EncodedSource(states, mask)
