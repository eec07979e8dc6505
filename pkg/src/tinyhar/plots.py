"""Figure rendering for the CLI report paths.

Every plotting helper writes a PNG next to the delimited artifact it
illustrates and returns the figure path.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ConfusionMatrix
from .modelpack import Budget, FootprintReport


def plot_history(history, path) -> Path:
    """Training loss and validation accuracy per epoch."""
    path = Path(path)
    epochs = [h.epoch for h in history]
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.plot(epochs, [h.train_loss for h in history], color="tab:blue", label="train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(
        epochs,
        [h.val_accuracy for h in history],
        color="tab:orange",
        label="val accuracy",
    )
    ax2.set_ylabel("validation accuracy", color="tab:orange")
    ax2.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_confusion(cm: ConfusionMatrix, path) -> Path:
    """Row-normalized confusion heatmap."""
    path = Path(path)
    n = len(cm.class_names)
    fig, ax = plt.subplots(figsize=(max(5, 0.35 * n), max(4, 0.3 * n)))
    im = ax.imshow(cm.rates, cmap="viridis", vmin=0, vmax=1)
    ax.set_xticks(range(n), cm.class_names, rotation=90, fontsize=6)
    ax.set_yticks(range(n), cm.class_names, fontsize=6)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_footprint(report: FootprintReport, budget: Budget, path) -> Path:
    """Used-vs-budget bars for the three memory regions."""
    path = Path(path)
    names = ["stack", "program", "data"]
    used = [report.stack_bytes, report.program_bytes, report.data_bytes]
    limits = [budget.max_stack, budget.max_program, budget.max_data]
    x = np.arange(3)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(x - 0.2, used, width=0.4, label="used")
    ax.bar(x + 0.2, limits, width=0.4, label="budget")
    ax.set_xticks(x, names)
    ax.set_ylabel("bytes")
    ax.set_yscale("log")
    ax.legend()
    for xi, (u, l) in zip(x, zip(used, limits)):
        ax.text(xi - 0.2, u, str(u), ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_injection(steps, path) -> Path:
    """Validation accuracy across injection steps, colored by decision."""
    path = Path(path)
    colors = {"accepted": "tab:green", "merged": "tab:blue", "discarded": "tab:red"}
    fig, ax = plt.subplots(figsize=(8, 4))
    for i, s in enumerate(steps):
        ax.scatter(i, s.val_accuracy, color=colors.get(s.decision, "gray"))
    ax.plot(range(len(steps)), [s.val_accuracy for s in steps], color="lightgray", zorder=0)
    ax.set_xticks(range(len(steps)), [s.candidate for s in steps], rotation=90, fontsize=6)
    ax.set_ylabel("validation accuracy")
    handles = [
        plt.Line2D([], [], marker="o", linestyle="", color=c, label=d)
        for d, c in colors.items()
    ]
    ax.legend(handles=handles, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
