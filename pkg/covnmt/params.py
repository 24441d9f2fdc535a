"""
Model parameters: every learnable matrix and embedding table, by name.

Weights use the row-vector convention: a layer computes x @ W with W stored
as [in x out]. No layer has a bias term.
"""
import zlib
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Tuple

import numpy as np

from .errors import CheckpointError, ConfigError
from .tensor import Tensor, parameter
from .vocab import INIT_SCALE, EmbeddingTable


class CoverageMode(str, Enum):
    BASE = 'base'
    GRU = 'gru'
    SUB = 'sub'
    BOTH = 'both'

    @property
    def rules(self) -> Tuple[str, ...]:
        """Coverage rules active in this mode, in state order"""
        return {
            CoverageMode.BASE: (),
            CoverageMode.GRU: ('gru',),
            CoverageMode.SUB: ('sub',),
            CoverageMode.BOTH: ('gru', 'sub'),
        }[self]

    @property
    def state_count(self) -> int:
        return len(self.rules)


GRU_GATES = ('W_z', 'U_z', 'W_r', 'U_r', 'W', 'U')
COVERAGE_GRU = ('W_zy', 'W_za', 'U_z', 'W_ry', 'W_ra', 'U_r', 'W_y', 'W_a', 'U')


@dataclass(frozen=True)
class ModelShape:
    src_vocab: int
    tgt_vocab: int
    d_emb: int = 64
    d_h: int = 64
    d_att: int = 64
    d_out: int = 64
    d_c: int = 100
    mode: CoverageMode = CoverageMode.BASE

    @property
    def d_s(self) -> int:
        """Decoder state width"""
        return self.d_h


def gru_shapes(prefix: str, d_in: int, d_h: int) -> Dict[str, Tuple[int, int]]:
    return {
        f'{prefix}.W_z': (d_in, d_h), f'{prefix}.U_z': (d_h, d_h),
        f'{prefix}.W_r': (d_in, d_h), f'{prefix}.U_r': (d_h, d_h),
        f'{prefix}.W': (d_in, d_h), f'{prefix}.U': (d_h, d_h),
    }


def parameter_shapes(shape: ModelShape) -> Dict[str, Tuple[int, ...]]:
    """Name -> extents for every parameter the given architecture owns"""
    d_emb, d_h, d_att, d_out, d_c = shape.d_emb, shape.d_h, shape.d_att, shape.d_out, shape.d_c
    shapes = {
        'src_embed': (shape.src_vocab, d_emb),
        'tgt_embed': (shape.tgt_vocab, d_emb),
        'dec_init.W': (d_h, shape.d_s),
        'att.W_s': (shape.d_s, d_att),
        'att.W_h': (2 * d_h, d_att),
        'att.W_y': (d_emb, d_att),
        'att.w_e': (d_att, 1),
        'out.W_o': (shape.d_s, d_out),
        'out.W_oy': (d_emb, d_out),
        'out.W_v': (d_out, shape.tgt_vocab),
    }
    shapes.update(gru_shapes('enc_fwd', d_emb, d_h))
    shapes.update(gru_shapes('enc_bwd', d_emb, d_h))
    shapes.update(gru_shapes('dec', d_emb + 2 * d_h, shape.d_s))

    if 'gru' in shape.mode.rules:
        shapes['cov_gru.table'] = (shape.src_vocab, d_c)
        shapes['att.W_c_gru'] = (d_c, d_att)
        for name in COVERAGE_GRU:
            if name.startswith('U'):
                shapes[f'cov_gru.{name}'] = (d_c, d_c)
            elif name.endswith('a'):
                shapes[f'cov_gru.{name}'] = (1, d_c)
            else:
                shapes[f'cov_gru.{name}'] = (d_emb, d_c)
    if 'sub' in shape.mode.rules:
        shapes['cov_sub.table'] = (shape.src_vocab, d_c)
        shapes['att.W_c_sub'] = (d_c, d_att)
        shapes['cov_sub.W_yc'] = (d_emb, d_c)
    return shapes


def _param_rng(seed: int, name: str) -> np.random.Generator:
    # one stream per (seed, name): a parameter's init does not depend on the mode
    return np.random.default_rng([seed, zlib.crc32(name.encode('utf-8'))])


class ModelParams:
    """Named collection of learnable tensors"""

    def __init__(self, tensors: Dict[str, Tensor]):
        self.tensors: Dict[str, Tensor] = dict(sorted(tensors.items()))

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def names(self) -> List[str]:
        return list(self.tensors)

    def items(self):
        return self.tensors.items()

    def table(self, name: str) -> EmbeddingTable:
        return EmbeddingTable(self.tensors[name])

    def gru(self, prefix: str) -> Dict[str, Tensor]:
        return {gate: self.tensors[f'{prefix}.{gate}'] for gate in GRU_GATES}

    def zero_grad(self):
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def gradients(self) -> Dict[str, np.ndarray]:
        return {name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for name, t in self.tensors.items()}

    def count(self) -> int:
        """Total number of scalar parameters"""
        return sum(t.size for t in self.tensors.values())

    def copy(self) -> 'ModelParams':
        return ModelParams({name: parameter(t.data.copy(), name=name) for name, t in self.tensors.items()})

    def infer_shape(self) -> ModelShape:
        """Recover architecture widths and mode from the tensor shapes"""
        try:
            src_vocab, d_emb = self['src_embed'].shape
            tgt_vocab = self['tgt_embed'].shape[0]
            d_h = self['enc_fwd.U'].shape[0]
            d_att = self['att.W_s'].shape[1]
            d_out = self['out.W_o'].shape[1]
        except KeyError as e:
            raise CheckpointError(f"parameter {e} missing") from None
        has_gru, has_sub = 'cov_gru.table' in self, 'cov_sub.table' in self
        mode = {
            (False, False): CoverageMode.BASE,
            (True, False): CoverageMode.GRU,
            (False, True): CoverageMode.SUB,
            (True, True): CoverageMode.BOTH,
        }[(has_gru, has_sub)]
        d_c = self['cov_gru.table' if has_gru else 'cov_sub.table'].shape[1] if mode.rules else 100
        shape = ModelShape(src_vocab, tgt_vocab, d_emb, d_h, d_att, d_out, d_c, mode)
        expected = parameter_shapes(shape)
        for name, extents in expected.items():
            if name not in self or self[name].shape != tuple(extents):
                raise CheckpointError(f"parameter '{name}' missing or misshapen for a {mode.value} model")
        extra = set(self.names()) - set(expected)
        if extra:
            raise CheckpointError(f"unexpected parameters {sorted(extra)}")
        return shape


def init_params(shape: ModelShape, seed: int = 1234) -> ModelParams:
    """Uniform [-0.08, 0.08] initialization, reproducible per parameter name"""
    if shape.mode not in list(CoverageMode):
        raise ConfigError(f"unknown coverage mode {shape.mode}", field='mode')
    tensors = {}
    for name, extents in parameter_shapes(shape).items():
        values = _param_rng(seed, name).uniform(-INIT_SCALE, INIT_SCALE, size=extents)
        tensors[name] = parameter(values, name=name)
    return ModelParams(tensors)
