"""
covnmt - attention NMT with coverage embeddings
Numpy autodiff, coverage-augmented attention, search and alignment diagnostics
"""

__version__ = "0.1.0"

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config
from .corpus import gen_synthetic, read_parallel
from .database import Database, runs_summary
from .decoding import beam_decode, greedy_decode, replace_unk, translate_all
from .evaluation import (
    alignment_f1,
    bleu4,
    bleu_stats,
    corpus_alignment_f1,
    extract_alignment,
    repetition_count,
)
from .experiments import compare_modes
from .model import NMTModel
from .params import CoverageMode, ModelShape, init_params
from .training import AdaDelta, TrainingExample, coverage_penalty_aligned, coverage_penalty_final, train
from .vocab import Vocabulary, build_vocab

__all__ = [
    'load_checkpoint',
    'save_checkpoint',
    'RunConfig',
    'load_config',
    'gen_synthetic',
    'read_parallel',
    'Database',
    'runs_summary',
    'beam_decode',
    'greedy_decode',
    'replace_unk',
    'translate_all',
    'alignment_f1',
    'bleu4',
    'bleu_stats',
    'corpus_alignment_f1',
    'extract_alignment',
    'repetition_count',
    'compare_modes',
    'NMTModel',
    'CoverageMode',
    'ModelShape',
    'init_params',
    'AdaDelta',
    'TrainingExample',
    'coverage_penalty_aligned',
    'coverage_penalty_final',
    'train',
    'Vocabulary',
    'build_vocab',
]
