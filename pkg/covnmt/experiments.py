"""
Side-by-side comparison of coverage modes on a synthetic task.
"""
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import RunConfig
from .console import log_console
from .corpus import gen_synthetic, to_examples
from .decoding import translate_all
from .errors import ConfigError
from .evaluation import bleu_stats, corpus_alignment_f1, extract_alignment, repetition_count, token_accuracy
from .model import NMTModel
from .params import CoverageMode
from .training import train
from .vocab import build_vocab

# system name -> (mode, whether the coverage penalty is on)
SYSTEMS: Dict[str, Tuple[str, bool]] = {
    'base': ('base', False),
    'gru': ('gru', False),
    'sub': ('sub', False),
    'both': ('both', False),
    'both+obj': ('both', True),
    'gru+obj': ('gru', True),
    'sub+obj': ('sub', True),
}
DEFAULT_SYSTEMS = ('base', 'gru', 'sub', 'both', 'both+obj')
# penalty weights for the +obj systems
OBJ_LAMBDAS = {'lambda_gru': 1e-4, 'lambda_sub': 1e-2}

RESULT_COLUMNS = ['system', 'mode', 'lambda_gru', 'lambda_sub', 'train_loss', 'bleu', 'bp', 'accuracy',
                  'align_p', 'align_r', 'align_f1', 'rep_total', 'rep_mean', 'cov_l1']


def export_to_csv(df: pd.DataFrame, filename: Union[str, Path]):
    """Export dataframe to CSV"""
    df.to_csv(filename, index=False)
    print(f"📊 Exported to {filename}")


def system_config(config: RunConfig, system: str) -> RunConfig:
    if system not in SYSTEMS:
        raise ConfigError(f"unknown system '{system}', expected one of {sorted(SYSTEMS)}", field='systems')
    mode, penalised = SYSTEMS[system]
    weights = OBJ_LAMBDAS if penalised else {'lambda_gru': 0.0, 'lambda_sub': 0.0}
    return config.model_copy(update={'mode': CoverageMode(mode), 'objective': 'mix', **weights})


def compare_modes(config: RunConfig, systems: Sequence[str] = DEFAULT_SYSTEMS, test_size: int = 200,
                  dev_size: Optional[int] = None, csv_path: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """
    Train every system on the same synthetic corpus and score its test translations

    Args:
        config (RunConfig): task, corpus size, widths, budget and seed shared by all systems
        systems: names from SYSTEMS
        test_size (int): held-out sentences to decode
        dev_size (int): dev sentences for the metric log (default size // 10, at least 10)
        csv_path: when given, the table is also written as CSV

    Returns:
        pd.DataFrame: one row per system with RESULT_COLUMNS
    """
    for system in systems:
        system_config(config, system)
    dev_size = dev_size or max(10, config.size // 10)
    lengths = dict(min_len=config.min_len, max_len=config.max_src_len)
    train_src, train_tgt, train_links = gen_synthetic(config.task, config.size, config.synthetic_vocab, config.seed, **lengths)
    dev_src, dev_tgt, dev_links = gen_synthetic(config.task, dev_size, config.synthetic_vocab, config.seed + 1, **lengths)
    test_src, test_tgt, test_links = gen_synthetic(config.task, test_size, config.synthetic_vocab, config.seed + 2, **lengths)

    src_vocab = build_vocab(train_src, config.src_vocab_size)
    tgt_vocab = build_vocab(train_tgt, config.tgt_vocab_size)
    corpus = to_examples(train_src, train_tgt, train_links, src_vocab, tgt_vocab)
    dev = to_examples(dev_src, dev_tgt, dev_links, src_vocab, tgt_vocab)
    test_ids = [src_vocab.encode(sentence) for sentence in test_src]

    rows = []
    for system in systems:
        run_config = system_config(config, system)
        log_console(f"experiment: training system '{system}'")
        model = NMTModel.create(run_config.shape(len(src_vocab), len(tgt_vocab)), seed=run_config.seed)
        metrics = train(run_config, model, corpus, dev)
        results = translate_all(model, test_ids, run_config.beam, run_config.max_len,
                                run_config.length_norm, run_config.workers)
        hypotheses = [result.words(tgt_vocab) for result in results]

        stats = bleu_stats(hypotheses, test_tgt)
        precision, recall, f1 = corpus_alignment_f1([extract_alignment(r.attention) for r in results], test_links)
        repeats = [repetition_count(h) for h in hypotheses]
        cov_l1 = float(np.mean([r.coverage_l1.mean() for r in results]))
        rows.append({
            'system': system,
            'mode': run_config.mode.value,
            'lambda_gru': run_config.lambda_gru,
            'lambda_sub': run_config.lambda_sub,
            'train_loss': float(metrics['train_loss'].iloc[-1]) if not metrics.empty else float('nan'),
            'bleu': stats.bleu,
            'bp': stats.brevity_penalty,
            'accuracy': token_accuracy(hypotheses, test_tgt),
            'align_p': precision,
            'align_r': recall,
            'align_f1': f1,
            'rep_total': int(sum(repeats)),
            'rep_mean': float(np.mean(repeats)),
            'cov_l1': cov_l1,
        })
        log_console(f"experiment: {system} bleu {stats.bleu:.4f} align F1 {f1:.4f} repeats {sum(repeats)}")

    table = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    if csv_path is not None:
        export_to_csv(table, csv_path)
    return table
