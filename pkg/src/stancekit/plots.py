"""Matplotlib figures written next to the delimited report outputs.

All renderers use the Agg backend and strip volatile PNG metadata so the
image bytes are reproducible across runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .corpus import STANCE_ORDER

_PNG_META = {"Software": None}
_LABELS = [s.value for s in STANCE_ORDER]


def confusion_figure(confusion: np.ndarray, relative: float,
                     path: str | Path) -> None:
    """Heatmap of the 4x4 confusion matrix with per-cell counts."""
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    mat = np.asarray(confusion, dtype=float)
    shade = mat / max(mat.max(), 1.0)
    ax.imshow(shade, cmap="Blues", vmin=0.0, vmax=1.0)
    for i in range(4):
        for j in range(4):
            color = "white" if shade[i, j] > 0.5 else "black"
            ax.text(j, i, f"{int(mat[i, j]):,}", ha="center", va="center",
                    color=color, fontsize=9)
    ax.set_xticks(range(4), _LABELS, rotation=30, ha="right")
    ax.set_yticks(range(4), _LABELS)
    ax.set_xlabel("predicted")
    ax.set_ylabel("truth")
    ax.set_title(f"Weighted score: {100.0 * relative:.2f}%")
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def loss_curve_figure(losses: dict[str, list[float]], path: str | Path) -> None:
    """Per-round training log-loss for each trained stage."""
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    for label, values in losses.items():
        ax.plot(range(1, len(values) + 1), values, label=label, linewidth=1.2)
    ax.set_xlabel("boosting round")
    ax.set_ylabel("training log-loss")
    if losses:
        ax.legend(frameon=False)
    ax.grid(alpha=0.3, linewidth=0.5)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def grid_scores_figure(point_labels: list[str], mean_scores: list[float],
                       path: str | Path) -> None:
    """Mean cross-validation relative score per grid point."""
    fig, ax = plt.subplots(figsize=(max(5.0, 0.9 * len(point_labels) + 2.0), 4.0))
    xs = np.arange(len(point_labels))
    ax.bar(xs, mean_scores, color="#4878d0")
    ax.set_xticks(xs, point_labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("mean relative score")
    lo = min(mean_scores) if mean_scores else 0.0
    ax.set_ylim(max(0.0, lo - 0.05), 1.0)
    ax.grid(axis="y", alpha=0.3, linewidth=0.5)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
