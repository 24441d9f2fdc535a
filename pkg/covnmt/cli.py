"""
Command-line entry points: train, translate, eval, gen, runs, experiment.

Every command builds a RunConfig from an optional key = value file plus
command-line flags (flags win). Errors surface as exit codes:
0 success, 1 usage/config, 2 data, 3 numeric failure.
"""
import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .checkpoint import checkpoint_path, latest_checkpoint, load_checkpoint, save_checkpoint
from .config import (BOOL_FIELDS, CONFIG_FILE, DATA_FOLDER, FIELDS, RunConfig, apply_precision, load_config,
                     parse_config_file, write_config)
from .console import log_console
from .corpus import gen_synthetic, read_alignments, read_parallel, read_sentences, to_examples, write_corpus
from .database import Database, open_registry, runs_summary
from .decoding import (TranslationResult, read_attention_dump, replace_unk, translate_all, write_attention_dump,
                       write_coverage_dumps)
from .errors import ConfigError, CovNMTError, DataError
from .evaluation import ALIGN_THRESHOLD, bleu_stats, corpus_alignment_f1, extract_alignment, repetition_count, token_accuracy
from .experiments import DEFAULT_SYSTEMS, compare_modes
from .model import NMTModel
from .plots import plot_attention, plot_training_curves
from .training import train
from .vocab import Vocabulary, build_vocab

SRC_VOCAB_FILE = 'src.vocab'
TGT_VOCAB_FILE = 'tgt.vocab'
EVAL_KINDS = ('align-f1', 'repetition', 'bleu', 'accuracy')
INHERITED_FIELDS = ('mode', 'precision')  # taken from config.txt beside a checkpoint


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises ConfigError instead of exiting"""

    def error(self, message):
        raise ConfigError(message)


def _require(config: RunConfig, *fields: str):
    for name in fields:
        if getattr(config, name) is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required", field=name)


# ====== COMMANDS ======

def cmd_train(config: RunConfig) -> pd.DataFrame:
    """Corpus ingestion, vocabularies, training; checkpoints and metrics.tsv go to output_dir"""
    _require(config, 'train_src', 'train_tgt', 'dev_src', 'dev_tgt')
    apply_precision(config)

    sources, targets, alignments = read_parallel(config.train_src, config.train_tgt, config.train_align)
    dev_sources, dev_targets, dev_alignments = read_parallel(config.dev_src, config.dev_tgt, config.dev_align)
    src_vocab = build_vocab(sources, config.src_vocab_size)
    tgt_vocab = build_vocab(targets, config.tgt_vocab_size)
    corpus = to_examples(sources, targets, alignments, src_vocab, tgt_vocab)
    dev = to_examples(dev_sources, dev_targets, dev_alignments, src_vocab, tgt_vocab)

    output_dir = config.resolved_output_dir()
    output_dir.mkdir(parents=True, exist_ok=True)
    src_vocab.save(output_dir / SRC_VOCAB_FILE)
    tgt_vocab.save(output_dir / TGT_VOCAB_FILE)
    write_config(config, output_dir / CONFIG_FILE)

    model = NMTModel.create(config.shape(len(src_vocab), len(tgt_vocab)), seed=config.seed)
    print(f"🚀 Training {model.mode.value} model on {len(corpus)} pairs "
          f"(vocab {len(src_vocab)}/{len(tgt_vocab)}, {model.params.count()} parameters)")
    if config.epochs == 0:
        save_checkpoint(model.params, checkpoint_path(output_dir, 0))

    metrics = train(config, model, corpus, dev, checkpoint_dir=output_dir, registry=open_registry(config.registry))
    if config.plot_dir is not None and not metrics.empty:
        Path(config.plot_dir).mkdir(parents=True, exist_ok=True)
        plot_training_curves(metrics, Path(config.plot_dir) / 'training.png')
    print(f"✅ Training finished, {len(metrics)} epoch(s) written to {output_dir}")
    return metrics


def load_translator(config: RunConfig):
    """Model and vocabularies from a checkpoint and the vocab files beside it"""
    checkpoint = Path(config.checkpoint) if config.checkpoint is not None else latest_checkpoint(config.resolved_output_dir())
    model_dir = checkpoint.parent
    for name in (SRC_VOCAB_FILE, TGT_VOCAB_FILE):
        if not (model_dir / name).exists():
            raise DataError(f"vocabulary file {name} missing beside the checkpoint", path=model_dir / name)
    # the checkpoint decides the mode unless one was asked for
    mode = config.mode if 'mode' in config.model_fields_set else None
    model = NMTModel(load_checkpoint(checkpoint), mode=mode)
    src_vocab = Vocabulary.load(model_dir / SRC_VOCAB_FILE)
    tgt_vocab = Vocabulary.load(model_dir / TGT_VOCAB_FILE)
    if len(src_vocab) != model.shape.src_vocab or len(tgt_vocab) != model.shape.tgt_vocab:
        raise DataError("vocabulary sizes do not match the checkpoint", path=model_dir)
    return model, src_vocab, tgt_vocab


def cmd_translate(config: RunConfig) -> List[str]:
    """Beam-decode every input line; one translation per line, optional attention and coverage dumps and heat maps"""
    _require(config, 'input')
    apply_precision(config)
    model, src_vocab, tgt_vocab = load_translator(config)

    sentences = read_sentences(config.input, allow_empty=True)
    busy = [k for k, tokens in enumerate(sentences) if tokens]
    decoded = translate_all(model, [src_vocab.encode(sentences[k]) for k in busy], config.beam, config.max_len,
                            config.length_norm, config.workers)
    results: List[TranslationResult] = [TranslationResult([], np.zeros((0, 0)), np.zeros(0), 0.0)
                                        for _ in sentences]
    for k, result in zip(busy, decoded):
        results[k] = result

    lines = []
    for tokens, result in zip(sentences, results):
        words = replace_unk(result, tokens, tgt_vocab) if config.replace_unk else result.words(tgt_vocab)
        lines.append(' '.join(words))

    if config.output is not None:
        with open(config.output, 'w', encoding='utf-8') as f:
            for line in lines:
                f.write(line + '\n')
    else:
        for line in lines:
            print(line)
    if config.attention_dump is not None:
        write_attention_dump(results, config.attention_dump)
    if config.coverage_dump is not None:
        write_coverage_dumps(results, config.coverage_dump)
    if config.plot_dir is not None:
        plot_dir = Path(config.plot_dir)
        plot_dir.mkdir(parents=True, exist_ok=True)
        for k in busy:
            if not results[k].tokens:
                continue
            plot_attention(results[k].attention, sentences[k], lines[k].split(), plot_dir / f'sent-{k:04d}.png',
                           title=f'sentence {k}')
    log_console(f"translated {len(busy)} sentence(s), {len(sentences) - len(busy)} empty")
    return lines


def _report(values: Dict[str, float]) -> Dict[str, float]:
    for metric, value in values.items():
        print(f"{metric}\t{value:.6f}" if isinstance(value, float) else f"{metric}\t{value}")
    return values


def cmd_eval(kind: str, files: Sequence[str], from_attention: bool = False, threshold: float = ALIGN_THRESHOLD,
             min_len: int = 4) -> Dict[str, float]:
    """Dispatch to the evaluation functions and print tab-separated metric lines"""
    if kind not in EVAL_KINDS:
        raise ConfigError(f"unknown evaluation '{kind}', expected one of {EVAL_KINDS}", field='kind')
    needed = 1 if kind == 'repetition' else 2
    if len(files) != needed:
        raise ConfigError(f"eval {kind} takes {needed} file(s), got {len(files)}", field='files')

    if kind == 'repetition':
        counts = [repetition_count(tokens, min_len) for tokens in read_sentences(files[0], allow_empty=True)]
        return _report({'sentences': len(counts), 'repeats_total': int(sum(counts)),
                        'repeats_mean': float(np.mean(counts)) if counts else 0.0})

    if kind == 'align-f1':
        if from_attention:
            predicted = [extract_alignment(matrix, threshold) for matrix in read_attention_dump(files[0])]
        else:
            predicted = read_alignments(files[0])
        gold = read_alignments(files[1])
        precision, recall, f1 = corpus_alignment_f1(predicted, gold)
        return _report({'precision': precision, 'recall': recall, 'f1': f1})

    hypotheses = read_sentences(files[0], allow_empty=True)
    references = read_sentences(files[1], allow_empty=True)
    if len(hypotheses) != len(references):
        raise DataError(f"{files[0]} has {len(hypotheses)} lines but {files[1]} has {len(references)}",
                        line=min(len(hypotheses), len(references)) + 1)
    if kind == 'accuracy':
        return _report({'accuracy': token_accuracy(hypotheses, references)})
    stats = bleu_stats(hypotheses, references)
    values = {'bleu': stats.bleu, 'bp': stats.brevity_penalty}
    values.update({f'p{n}': p for n, p in enumerate(stats.precisions, start=1)})
    return _report(values)


def cmd_gen(config: RunConfig, prefix: Optional[str] = None):
    """Synthetic parallel corpus as <prefix>.src/.tgt/.align"""
    sources, targets, alignments = gen_synthetic(config.task, config.size, config.synthetic_vocab, config.seed,
                                                 config.min_len, config.max_src_len)
    prefix = Path(prefix) if prefix else Path(DATA_FOLDER) / config.task
    paths = write_corpus(prefix, sources, targets, alignments)
    print(f"✅ {config.size} {config.task} pairs written to {paths[0]}, {paths[1]}, {paths[2]}")
    return paths


def cmd_runs(registry: str) -> pd.DataFrame:
    if not Path(registry).exists():
        raise DataError("registry not found", path=registry)
    db = Database(registry)
    table = runs_summary(db)
    print(table.to_string(index=False) if not table.empty else "📋 No runs recorded yet")
    return table


def cmd_experiment(config: RunConfig, systems: Sequence[str], test_size: int, csv_path: Optional[str] = None) -> pd.DataFrame:
    apply_precision(config)
    table = compare_modes(config, systems, test_size, csv_path=csv_path)
    print(table.to_string(index=False))
    return table


# ====== PARSER ======

def add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--config', default=None, help='key = value settings file')
    for name in FIELDS:
        flag = '--' + name.replace('_', '-')
        if name in BOOL_FIELDS:
            parser.add_argument(flag, dest=name, action='store_const', const='true', default=None)
        else:
            parser.add_argument(flag, dest=name, default=None, metavar=name.upper())


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog='covnmt', description='Coverage-embedding attention NMT')
    commands = parser.add_subparsers(dest='command', required=True)

    add_config_flags(commands.add_parser('train', help='train a model'))
    add_config_flags(commands.add_parser('translate', help='translate a file with a checkpoint'))

    gen = commands.add_parser('gen', help='generate a synthetic parallel corpus')
    add_config_flags(gen)
    gen.add_argument('--prefix', default=None, help='output prefix for .src/.tgt/.align')

    evaluate = commands.add_parser('eval', help='score output files')
    evaluate.add_argument('kind', choices=EVAL_KINDS)
    evaluate.add_argument('files', nargs='+')
    evaluate.add_argument('--from-attention', action='store_true', help='first file is an attention dump')
    evaluate.add_argument('--threshold', type=float, default=ALIGN_THRESHOLD)
    evaluate.add_argument('--min-len', type=int, default=4)

    runs = commands.add_parser('runs', help='list runs recorded in a registry')
    runs.add_argument('--registry', required=True)

    experiment = commands.add_parser('experiment', help='compare coverage modes on a synthetic task')
    add_config_flags(experiment)
    experiment.add_argument('--systems', default=','.join(DEFAULT_SYSTEMS))
    experiment.add_argument('--test-size', type=int, default=200)
    experiment.add_argument('--csv', default=None)
    return parser


def _overrides(args) -> Dict[str, str]:
    return {name: getattr(args, name) for name in FIELDS if getattr(args, name, None) is not None}


def _translate_config_file(overrides: Dict[str, str]) -> Optional[Path]:
    """config.txt beside the checkpoint (or in the output directory) when present"""
    if 'checkpoint' in overrides:
        candidate = Path(overrides['checkpoint']).parent / CONFIG_FILE
    else:
        candidate = Path(overrides.get('output_dir', DATA_FOLDER)) / CONFIG_FILE
    return candidate if candidate.exists() else None


def _inherited(overrides: Dict[str, str]) -> Dict[str, str]:
    """Mode and precision of the trained model under the translate flags; nothing else carries over"""
    config_file = _translate_config_file(overrides)
    if config_file is None:
        return overrides
    saved = parse_config_file(config_file)
    values = {name: saved[name] for name in INHERITED_FIELDS if name in saved}
    values.update(overrides)
    return values


def run(argv: Optional[Sequence[str]] = None):
    args = build_parser().parse_args(argv)

    if args.command == 'eval':
        return cmd_eval(args.kind, args.files, args.from_attention, args.threshold, args.min_len)
    if args.command == 'runs':
        return cmd_runs(args.registry)

    overrides = _overrides(args)
    if args.config is None and args.command == 'translate':
        config = load_config(None, _inherited(overrides))
    else:
        config = load_config(args.config, overrides)

    if args.command == 'train':
        return cmd_train(config)
    if args.command == 'translate':
        return cmd_translate(config)
    if args.command == 'gen':
        return cmd_gen(config, args.prefix)
    systems = [s.strip() for s in args.systems.split(',') if s.strip()]
    return cmd_experiment(config, systems, args.test_size, args.csv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        run(argv)
        return 0
    except CovNMTError as e:
        log_console(str(e), "ERROR")
        return e.exit_code


if __name__ == '__main__':
    sys.exit(main())
