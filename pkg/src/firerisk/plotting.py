"""Figures written next to the evaluation table (PNG, non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .metrics import confusion_matrix  # noqa: E402


def iou_bars(table: pd.DataFrame, path: Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(8, 4))
    n_models = len(table.columns)
    width = 0.8 / n_models
    x = np.arange(len(table.index))
    for i, model in enumerate(table.columns):
        ax.bar(x + i * width - 0.4 + width / 2, table[model].to_numpy(), width, label=model)
    ax.set_xticks(x, table.index)
    ax.set_ylim(0, 1)
    ax.set_ylabel("ordinal IoU")
    ax.set_title(title)
    ax.legend(fontsize=8, ncol=n_models)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def confusion_grid(preds: pd.DataFrame, path: Path, model: str = "gru") -> Path:
    targets = list(dict.fromkeys(preds["target"]))
    fig, axes = plt.subplots(1, len(targets), figsize=(3.2 * len(targets), 3.2), squeeze=False)
    for ax, t in zip(axes[0], targets):
        g = preds[preds["target"] == t]
        cm = confusion_matrix(g["y_true"], g[model])
        ax.imshow(cm, cmap="Blues")
        for (i, j), v in np.ndenumerate(cm):
            ax.text(j, i, str(v), ha="center", va="center", fontsize=7)
        ax.set_title(t, fontsize=9)
        ax.set_xlabel("predicted")
        ax.set_ylabel("observed")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def signal_plot(preds: pd.DataFrame, zone: int, path: Path, model: str = "gru") -> Path:
    """Observed and predicted class over time for one zone, one panel per target."""
    sub = preds[preds["zone"] == zone]
    targets = list(dict.fromkeys(sub["target"]))
    fig, axes = plt.subplots(len(targets), 1, figsize=(9, 1.8 * max(1, len(targets))),
                             sharex=True, squeeze=False)
    for ax, t in zip(axes[:, 0], targets):
        g = sub[sub["target"] == t].sort_values("date")
        d = pd.to_datetime(g["date"])
        ax.step(d, g["y_true"], where="mid", label="observed", lw=1)
        ax.step(d, g[model], where="mid", label=model, lw=1, alpha=0.8)
        ax.set_ylim(-0.3, 4.3)
        ax.set_ylabel(t, fontsize=8)
    axes[0, 0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def correlation_heatmap(corr: pd.DataFrame, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(corr.to_numpy(dtype=float), vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(len(corr)), corr.columns, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(len(corr)), corr.index, fontsize=8)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
