"""
Attention heat maps and training curves.
"""
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .errors import DataError


def plot_attention(attention, source_words: Sequence[str], target_words: Sequence[str],
                   path: Optional[Union[str, Path]] = None, title: str = ''):
    """Heat map of one sentence's attention, target steps on rows and source words on columns"""
    matrix = np.asarray(attention, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape != (len(target_words), len(source_words)):
        raise DataError(f"attention of shape {matrix.shape} does not match "
                        f"{len(target_words)} target and {len(source_words)} source words")

    width = max(4, 0.5 * len(source_words) + 2)
    height = max(3, 0.5 * len(target_words) + 2)
    fig, ax = plt.subplots(figsize=(width, height))
    ax.imshow(matrix, cmap='Greys', vmin=0.0, vmax=1.0, aspect='auto')
    ax.set_xticks(range(len(source_words)))
    ax.set_xticklabels(source_words, rotation=45, ha='right')
    ax.set_yticks(range(len(target_words)))
    ax.set_yticklabels(target_words)
    ax.set_xlabel('Source')
    ax.set_ylabel('Target')
    if title:
        ax.set_title(title)

    plt.tight_layout()
    if path is not None:
        fig.savefig(path, format='png')
        plt.close(fig)
    return fig


def plot_training_curves(metrics: pd.DataFrame, path: Optional[Union[str, Path]] = None):
    """Losses, dev accuracy and coverage L1 per epoch"""
    fig, (ax1, ax2, ax3) = plt.subplots(1, 3, figsize=(15, 4))

    if not metrics.empty:
        ax1.plot(metrics['epoch'], metrics['train_loss'], 'o-', color='blue', label='train')
        ax1.plot(metrics['epoch'], metrics['dev_loss'], 'o-', color='orange', label='dev')
        ax1.legend()
        ax2.plot(metrics['epoch'], metrics['dev_acc'], 'o-', color='green')
        ax3.plot(metrics['epoch'], metrics['cov_l1'], 'o-', color='red')
    else:
        for ax in (ax1, ax2, ax3):
            ax.text(0.5, 0.5, 'No epochs', ha='center', va='center', transform=ax.transAxes)

    ax1.set_title('Loss')
    ax2.set_title('Dev token accuracy')
    ax3.set_title('Mean final coverage L1')
    for ax in (ax1, ax2, ax3):
        ax.set_xlabel('Epoch')

    plt.tight_layout()
    if path is not None:
        fig.savefig(path, format='png')
        plt.close(fig)
    return fig
