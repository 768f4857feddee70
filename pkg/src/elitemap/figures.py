"""Matplotlib figure rendering (headless, files only)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

METRIC_LABELS = {
    "coverage": "coverage",
    "global_reliability": "global reliability",
    "precision": "precision (opt-in reliability)",
    "global_performance": "global performance",
}


def metric_boxplots(
    values: dict[str, dict[str, list[float]]],
    dest: Union[str, Path],
    title: Optional[str] = None,
) -> None:
    """2×2 panel, one box per treatment per metric.

    ``values[metric][treatment]`` is the list of per-run values (runs where
    the metric was undefined are simply absent from the list).
    """
    metrics = [m for m in METRIC_LABELS if m in values]
    fig, axes = plt.subplots(2, 2, figsize=(9, 7), constrained_layout=True)
    for ax, metric in zip(axes.flat, metrics):
        treatments = list(values[metric])
        data = [values[metric][t] for t in treatments]
        filled = [(d if d else [np.nan]) for d in data]
        ax.boxplot(filled, tick_labels=treatments, whis=(0, 100))
        ax.set_ylabel(METRIC_LABELS[metric])
        ax.set_ylim(-0.05, 1.05)
        ax.tick_params(axis="x", rotation=30)
        ax.grid(True, axis="y", alpha=0.3)
    for ax in axes.flat[len(metrics):]:
        ax.set_axis_off()
    if title:
        fig.suptitle(title)
    fig.savefig(dest, dpi=110)
    plt.close(fig)


def archive_heatmap(
    matrix: np.ndarray,
    bounds: Sequence[tuple[float, float]],
    dest: Union[str, Path],
    title: Optional[str] = None,
    axis_labels: Optional[Sequence[str]] = None,
) -> None:
    """Render a heatmap matrix (already oriented y-up) as a PNG.

    The color scale is normalized per map; its range ends up in the colorbar
    rather than any shared metadata, so maps from different runs are each
    shown at full contrast.
    """
    matrix = np.asarray(matrix, dtype=float)
    cmap = plt.get_cmap("viridis").copy()
    cmap.set_bad("#d9d9d9")
    fig, ax = plt.subplots(figsize=(6, 5), constrained_layout=True)
    if len(bounds) == 1:
        extent = (bounds[0][0], bounds[0][1], 0.0, 1.0)
        ylabel = None
    else:
        extent = (bounds[0][0], bounds[0][1], bounds[1][0], bounds[1][1])
        ylabel = axis_labels[1] if axis_labels else "feature 2"
    im = ax.imshow(
        np.ma.masked_invalid(matrix),
        origin="upper",
        extent=extent,
        aspect="auto",
        cmap=cmap,
        interpolation="nearest",
    )
    ax.set_xlabel(axis_labels[0] if axis_labels else "feature 1")
    if ylabel:
        ax.set_ylabel(ylabel)
    else:
        ax.set_yticks([])
    fig.colorbar(im, ax=ax, label="fitness")
    if title:
        ax.set_title(title)
    fig.savefig(dest, dpi=110)
    plt.close(fig)
