"""
Training objectives, AdaDelta and the teacher-forced training loop.
"""
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .checkpoint import checkpoint_path, save_checkpoint
from .console import clean_memory, log_console
from .coverage import CoverageState
from .database import Database, finish_run, record_epoch, start_run
from .errors import ConfigError, DataError, DimensionError, EmptyInputError, NumericFailureError
from .model import ForwardTrace, NMTModel
from .params import CoverageMode, ModelParams
from .tensor import Tape, Tensor, absolute, add, constant, no_grad, scale, stack, sum_all, take

METRIC_COLUMNS = ['epoch', 'train_loss', 'dev_loss', 'dev_acc', 'cov_l1']
METRIC_LOG = 'metrics.tsv'


@dataclass
class TrainingExample:
    source: List[int]
    target: List[int]
    links: Optional[List[Tuple[int, int]]] = None   # (source i, target j), both 0-based

    def __post_init__(self):
        if not self.source:
            raise EmptyInputError("training example has an empty source")
        if self.links is not None:
            for i, j in self.links:
                if not (0 <= i < len(self.source)) or not (0 <= j < len(self.target)):
                    raise DataError(f"link {i}-{j} outside a {len(self.source)}x{len(self.target)} sentence pair")


# ====== OBJECTIVES ======

def check_lambdas(lambdas: Dict[str, float]):
    for rule, value in lambdas.items():
        if value < 0:
            raise ConfigError(f"coverage coefficient for '{rule}' must be nonnegative, got {value}", field=f'lambda_{rule}')


def _rows_l1(state: CoverageState, rows: np.ndarray) -> Tensor:
    return sum_all(absolute(take(state.matrix, rows)))


def nll(model: NMTModel, example: TrainingExample) -> Tensor:
    return model.teacher_forced(example.source, example.target).nll


def coverage_penalty_final(states: Sequence[CoverageState], lambdas: Dict[str, float]) -> Tensor:
    """sum over rules of lambda * sum_i ||c_{m,x_i}||_1 over unmasked positions"""
    check_lambdas(lambdas)
    total = constant(0.0)
    for state in states:
        weight = lambdas.get(state.rule, 0.0)
        if weight == 0.0:
            continue
        total = add(total, scale(_rows_l1(state, np.flatnonzero(state.mask)), weight))
    return total


def last_aligned_steps(links: Sequence[Tuple[int, int]], source_length: int, m: int) -> np.ndarray:
    """a_{x_i}: 1-based last target step aligned to source i; m for unaligned words"""
    steps = np.zeros(source_length, dtype=np.int64)
    for i, j in links:
        if not (0 <= i < source_length) or not (0 <= j < m):
            raise DataError(f"link {i}-{j} outside a sentence pair of {source_length} source words and {m} target steps")
        steps[i] = max(steps[i], j + 1)
    steps[steps == 0] = m
    return steps


def coverage_penalty_aligned(history: Sequence[Sequence[CoverageState]], links: Sequence[Tuple[int, int]],
                             lambdas: Dict[str, float]) -> Tensor:
    """sum over rules of lambda * sum_i sum_{j = a_{x_i}}^{m} ||c_{j,x_i}||_1"""
    check_lambdas(lambdas)
    total = constant(0.0)
    if not history or not history[0]:
        return total
    m = len(history)
    first = history[0][0]
    steps = last_aligned_steps(links, first.length, m)
    for t, states in enumerate(history, start=1):
        rows = np.flatnonzero((steps <= t) & first.mask)
        if rows.size == 0:
            continue
        for state in states:
            weight = lambdas.get(state.rule, 0.0)
            if weight == 0.0:
                continue
            total = add(total, scale(_rows_l1(state, rows), weight))
    return total


def objective(model: NMTModel, example: TrainingExample, kind: str = 'mix',
              lambdas: Optional[Dict[str, float]] = None) -> Tuple[Tensor, ForwardTrace]:
    """Per-sentence loss: NLL plus the configured coverage penalty"""
    lambdas = lambdas or {}
    trace = model.teacher_forced(example.source, example.target)
    if model.mode == CoverageMode.BASE or not lambdas:
        return trace.nll, trace
    if kind == 'mix':
        penalty = coverage_penalty_final(trace.final_coverage, lambdas)
    elif kind == 'aligned':
        if example.links is None:
            raise DataError("aligned objective needs gold links for every training example")
        penalty = coverage_penalty_aligned(trace.coverage, example.links, lambdas)
    else:
        raise ConfigError(f"unknown objective '{kind}'", field='objective')
    return add(trace.nll, penalty), trace


# ====== OPTIMIZER ======

class AdaDelta:
    """
    Per-entry adaptive steps from decaying averages of g^2 and dx^2

    E[g^2] <- rho E[g^2] + (1 - rho) g^2
    dx     <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
    """

    def __init__(self, rho: float = 0.95, eps: float = 1e-6):
        self.rho = rho
        self.eps = eps
        self.square_avg: Dict[str, np.ndarray] = {}
        self.acc_delta: Dict[str, np.ndarray] = {}

    def step(self, params: Union[ModelParams, Dict[str, Tensor]], grads: Dict[str, np.ndarray]) -> bool:
        """Apply one update; returns False (and changes nothing) on a non-finite gradient"""
        for name, grad in grads.items():
            if grad.shape != params[name].shape:
                raise DimensionError(f"gradient for {name} has the wrong shape", grad.shape, params[name].shape)
            if not np.all(np.isfinite(grad)):
                log_console(f"non-finite gradient in {name}, update skipped", "WARNING")
                return False

        for name, grad in grads.items():
            param = params[name]
            square_avg = self.square_avg.setdefault(name, np.zeros_like(param.data))
            acc_delta = self.acc_delta.setdefault(name, np.zeros_like(param.data))

            square_avg *= self.rho
            square_avg += (1 - self.rho) * grad * grad
            delta = -(np.sqrt(acc_delta + self.eps) / np.sqrt(square_avg + self.eps)) * grad
            acc_delta *= self.rho
            acc_delta += (1 - self.rho) * delta * delta
            param.data += delta
        return True


# ====== LOOP ======

def make_batches(examples: Sequence[TrainingExample], batch_size: int, rng: np.random.Generator) -> List[List[int]]:
    """Shuffle, sort by source length inside buckets of 20 batches, shuffle batch order"""
    order = rng.permutation(len(examples))
    bucket = batch_size * 20
    batches = []
    for start in range(0, len(order), bucket):
        chunk = sorted((int(k) for k in order[start:start + bucket]), key=lambda k: (len(examples[k].source), k))
        batches.extend(chunk[i:i + batch_size] for i in range(0, len(chunk), batch_size))
    return [batches[int(k)] for k in rng.permutation(len(batches))]


def check_vocabulary(model: NMTModel, examples: Sequence[TrainingExample], label: str):
    src_vocab, tgt_vocab = model.shape.src_vocab, model.shape.tgt_vocab
    for n, example in enumerate(examples, start=1):
        if max(example.source) >= src_vocab or min(example.source) < 0:
            raise DataError(f"{label} sentence {n}: source id outside vocabulary of size {src_vocab}")
        if example.target and (max(example.target) >= tgt_vocab or min(example.target) < 0):
            raise DataError(f"{label} sentence {n}: target id outside vocabulary of size {tgt_vocab}")


def token_accuracy(trace: ForwardTrace) -> Tuple[int, int]:
    """Teacher-forced argmax hits and token count (EOS included)"""
    hits = sum(int(p == y) for p, y in zip(trace.predictions, trace.targets))
    return hits, len(trace.targets)


def evaluate(model: NMTModel, examples: Sequence[TrainingExample]) -> Tuple[float, float, float]:
    """Mean sentence NLL, token accuracy, mean final coverage L1 per unmasked position"""
    total_nll, hits, tokens, l1_sum, positions = 0.0, 0, 0, 0.0, 0
    with no_grad():
        for example in examples:
            trace = model.teacher_forced(example.source, example.target)
            total_nll += trace.nll.item()
            h, n = token_accuracy(trace)
            hits, tokens = hits + h, tokens + n
            for state in trace.final_coverage:
                rows = np.flatnonzero(state.mask)
                l1_sum += float(np.abs(state.matrix.data[rows].astype(np.float64)).sum())
            if trace.final_coverage:
                positions += int(trace.final_coverage[0].mask.sum())
    mean_l1 = l1_sum / positions if positions else 0.0
    return total_nll / len(examples), hits / tokens, mean_l1


def train(config, model: NMTModel, corpus: Sequence[TrainingExample], dev: Sequence[TrainingExample],
          checkpoint_dir: Optional[Union[str, Path]] = None, registry: Optional[Database] = None) -> pd.DataFrame:
    """
    Train with mini-batch AdaDelta

    Args:
        config (RunConfig): batch, epochs, seed, objective and lambdas
        model (NMTModel): model whose parameters are updated in place
        corpus: training examples
        dev: held-out examples for the per-epoch metrics
        checkpoint_dir: when given, a checkpoint per epoch plus metrics.tsv
        registry: when given, the run and its epochs are recorded

    Returns:
        pd.DataFrame: one row per epoch with METRIC_COLUMNS
    """
    if not corpus:
        raise EmptyInputError("training corpus is empty")
    if not dev:
        raise EmptyInputError("dev corpus is empty")
    check_vocabulary(model, corpus, 'train')
    check_vocabulary(model, dev, 'dev')
    if config.objective == 'aligned' and any(example.links is None for example in corpus):
        raise DataError("aligned objective needs gold links for every training example")

    lambdas = config.lambdas() if model.mode != CoverageMode.BASE else {}
    check_lambdas(lambdas)
    rng = np.random.default_rng(config.seed)
    optimizer = AdaDelta()

    metric_path = None
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
        metric_path = checkpoint_dir / METRIC_LOG
        metric_path.write_text('', encoding='utf-8')

    run_id = start_run(registry, config) if registry is not None else None
    log_console(f"training {model.mode.value} model: {model.params.count()} parameters, "
                f"{len(corpus)} pairs, batch {config.batch}, {config.epochs} epochs")

    rows = []
    try:
        for epoch in range(1, config.epochs + 1):
            total, count = 0.0, 0
            for b, batch in enumerate(make_batches(corpus, config.batch, rng)):
                model.params.zero_grad()
                with Tape() as tape:
                    terms = [objective(model, corpus[k], config.objective, lambdas)[0] for k in batch]
                    loss = scale(sum_all(stack(terms)), 1.0 / len(batch))
                value = loss.item()
                if not math.isfinite(value):
                    raise NumericFailureError(f"loss diverged at epoch {epoch}, batch {b + 1} (value {value})", "objective")
                tape.backward(loss)
                optimizer.step(model.params, model.params.gradients())
                total += value * len(batch)
                count += len(batch)

            dev_loss, dev_acc, cov_l1 = evaluate(model, dev)
            row = {'epoch': epoch, 'train_loss': total / count, 'dev_loss': dev_loss,
                   'dev_acc': dev_acc, 'cov_l1': cov_l1}
            rows.append(row)
            log_console(f"epoch {epoch}: train {row['train_loss']:.4f} dev {dev_loss:.4f} "
                        f"acc {dev_acc:.4f} coverage {cov_l1:.4f}")

            if checkpoint_dir is not None:
                save_checkpoint(model.params, checkpoint_path(checkpoint_dir, epoch))
                with open(metric_path, 'a', encoding='utf-8') as f:
                    f.write(format_metric_line(row))
            if registry is not None:
                record_epoch(registry, run_id, row)
            clean_memory()
    except Exception:
        if registry is not None:
            finish_run(registry, run_id, 'failed')
        raise
    finally:
        model.params.zero_grad()

    if registry is not None:
        finish_run(registry, run_id, 'finished')
    return pd.DataFrame(rows, columns=METRIC_COLUMNS)


def format_metric_line(row: Dict) -> str:
    return (f"{row['epoch']}\t{row['train_loss']:.6f}\t{row['dev_loss']:.6f}"
            f"\t{row['dev_acc']:.6f}\t{row['cov_l1']:.6f}\n")
