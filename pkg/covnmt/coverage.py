"""
Coverage embeddings: one vector per source position, started from a learned
per-word table and driven toward zero as the word gets translated.

Two update rules are available and can run side by side on separate states:
  - gru: c_t = z * c_{t-1} + (1 - z) * c~ (gate orientation kept as published)
  - sub: c_t = c_{t-1} - alpha_t * (emb(y_t) W_yc)
"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, DimensionError
from .params import CoverageMode, ModelParams
from .tensor import Tensor, add, matmul, mul, one_minus, put_rows, reshape, sigmoid, sub, take, tanh
from .vocab import PAD, EmbeddingTable, embed_one, lookup

COVERAGE_TABLES = {'gru': 'cov_gru.table', 'sub': 'cov_sub.table'}


@dataclass(frozen=True)
class CoverageState:
    matrix: Tensor          # l x d_c
    rule: str               # 'gru' or 'sub'
    step: int
    mask: np.ndarray        # True at real tokens

    @property
    def length(self) -> int:
        return self.matrix.shape[0]


def init_coverage(table: EmbeddingTable, source_ids: Sequence[int], rule: str) -> CoverageState:
    """Row j is the table row of x_j; repeated words start identical"""
    if rule not in COVERAGE_TABLES:
        raise ConfigError(f"unknown coverage rule '{rule}'", field='mode')
    ids = np.asarray(source_ids, dtype=np.int64).reshape(-1)
    return CoverageState(lookup(table, ids), rule, 0, ids != PAD)


def init_states(params: ModelParams, mode: CoverageMode, source_ids: Sequence[int]) -> Tuple[CoverageState, ...]:
    return tuple(init_coverage(params.table(COVERAGE_TABLES[rule]), source_ids, rule) for rule in mode.rules)


def _active(cov: CoverageState, alpha: Tensor):
    """Unmasked rows of the coverage matrix and alpha as an n x 1 column"""
    if alpha.shape != (cov.length,):
        raise DimensionError("attention length differs from coverage rows", alpha.shape, cov.matrix.shape)
    rows = np.flatnonzero(cov.mask)
    if rows.size == cov.length:
        return rows, cov.matrix, reshape(alpha, (cov.length, 1))
    return rows, take(cov.matrix, rows), reshape(take(alpha, rows), (rows.size, 1))


def _write_back(cov: CoverageState, rows: np.ndarray, updated: Tensor) -> Tensor:
    if rows.size == cov.length:
        return updated
    return put_rows(cov.matrix, rows, updated)


def update_gru(params: ModelParams, cov: CoverageState, y_id: int, alpha: Tensor) -> CoverageState:
    if cov.rule != 'gru':
        raise ConfigError(f"update_gru applied to a '{cov.rule}' coverage state", field='mode')
    rows, c_prev, a = _active(cov, alpha)
    y = embed_one(params.table('tgt_embed'), y_id)
    p = lambda name: params[f'cov_gru.{name}']

    z = sigmoid(add(add(matmul(y, p('W_zy')), matmul(a, p('W_za'))), matmul(c_prev, p('U_z'))))
    r = sigmoid(add(add(matmul(y, p('W_ry')), matmul(a, p('W_ra'))), matmul(c_prev, p('U_r'))))
    candidate = tanh(add(add(matmul(y, p('W_y')), matmul(a, p('W_a'))), mul(r, matmul(c_prev, p('U')))))
    updated = add(mul(z, c_prev), mul(one_minus(z), candidate))
    return CoverageState(_write_back(cov, rows, updated), 'gru', cov.step + 1, cov.mask)


def update_sub(params: ModelParams, cov: CoverageState, y_id: int, alpha: Tensor) -> CoverageState:
    if cov.rule != 'sub':
        raise ConfigError(f"update_sub applied to a '{cov.rule}' coverage state", field='mode')
    rows, c_prev, a = _active(cov, alpha)
    y = embed_one(params.table('tgt_embed'), y_id)
    updated = sub(c_prev, mul(a, matmul(y, params['cov_sub.W_yc'])))
    return CoverageState(_write_back(cov, rows, updated), 'sub', cov.step + 1, cov.mask)


UPDATES = {'gru': update_gru, 'sub': update_sub}


def step_all(params: ModelParams, mode: CoverageMode, states: Sequence[CoverageState],
             y_id: int, alpha: Tensor) -> Tuple[CoverageState, ...]:
    """Advance every state of the mode with the same word and attention"""
    check_states(mode, states)
    return tuple(UPDATES[state.rule](params, state, y_id, alpha) for state in states)


def check_states(mode: CoverageMode, states: Sequence[CoverageState]):
    rules = tuple(state.rule for state in states)
    if rules != mode.rules:
        raise ConfigError(f"mode '{mode.value}' needs coverage states {mode.rules}, got {rules}", field='mode')


def coverage_l1(state: CoverageState) -> np.ndarray:
    """L1 norm per source position; zero at masked positions"""
    norms = np.abs(state.matrix.data.astype(np.float64)).sum(axis=1)
    return np.where(state.mask, norms, 0.0)


def coverage_lines(history: Sequence[Tuple[CoverageState, ...]]) -> List[str]:
    """One line per (step, position): t, j, then the L1 norm of each active rule"""
    lines = []
    for states in history:
        if not states:
            continue
        norms = [coverage_l1(state) for state in states]
        t = states[0].step
        for j in range(states[0].length):
            values = '\t'.join(f"{n[j]:.6f}" for n in norms)
            lines.append(f"{t}\t{j}\t{values}")
    return lines


def write_coverage_dump(history: Sequence[Tuple[CoverageState, ...]], path: Union[str, Path]):
    with open(path, 'w', encoding='utf-8') as f:
        for line in coverage_lines(history):
            f.write(line + '\n')
