"""Report figures rendered next to the delimited sweep output."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import EmptyRows
from .harness import ResultRow


def plot_identification_rates(rows: list[ResultRow], path) -> None:
    """Grouped bar chart of IR (%) per front-end, one bar group per kernel."""
    if not rows:
        raise EmptyRows("no result rows to plot")
    kernels = list(dict.fromkeys(r.kernel for r in rows))
    features = list(dict.fromkeys(r.feature for r in rows))
    ir = {(r.feature, r.kernel): r.ir for r in rows}

    x = np.arange(len(features))
    width = 0.8 / len(kernels)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(features)), 4.0))
    for k_idx, kernel in enumerate(kernels):
        heights = [ir.get((f, kernel), 0.0) for f in features]
        offset = (k_idx - (len(kernels) - 1) / 2.0) * width
        bars = ax.bar(x + offset, heights, width, label=kernel)
        ax.bar_label(bars, fmt="%.1f", fontsize=7, padding=2)
    ax.set_xticks(x)
    ax.set_xticklabels(features, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("identification rate (%)")
    ax.set_ylim(0, 105)
    ax.legend(title="kernel")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_confusions(predictions, truth, path) -> None:
    """Confusion matrix heatmap for one identification run."""
    labels = sorted(set(truth) | set(predictions))
    index = {label: i for i, label in enumerate(labels)}
    matrix = np.zeros((len(labels), len(labels)))
    for p, t in zip(predictions, truth):
        matrix[index[t], index[p]] += 1

    fig, ax = plt.subplots(figsize=(5.5, 5.0))
    im = ax.imshow(matrix, cmap="Blues")
    ax.set_xticks(range(len(labels)))
    ax.set_yticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=90, fontsize=7)
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
