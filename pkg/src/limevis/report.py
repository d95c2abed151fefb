"""Matplotlib report figures written alongside the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .session import GRID_COLUMNS, Session, overview_cells

CORRECT_COLOR = "#1f77b4"
INCORRECT_COLOR = "#d62728"


def save_overview_figure(session: Session, path, mode: str = "lime"):
    """10x10 thumbnail grid with blue/red borders by prediction correctness."""
    cells = overview_cells(session)
    rows = max(c.row for c in cells) + 1
    fig, axes = plt.subplots(rows, GRID_COLUMNS, figsize=(GRID_COLUMNS * 1.1, rows * 1.1))
    axes = np.atleast_2d(axes)
    for ax in axes.ravel():
        ax.set_axis_off()
    for cell, entry in zip(cells, session.entries):
        ax = axes[cell.row, cell.col]
        image = entry.lime_image if mode == "lime" else entry.original
        ax.imshow(image.pixels)
        ax.set_axis_on()
        ax.set_xticks([])
        ax.set_yticks([])
        color = CORRECT_COLOR if cell.correct else INCORRECT_COLOR
        for spine in ax.spines.values():
            spine.set_color(color)
            spine.set_linewidth(2.5)
    fig.suptitle(f"{session.category_name}: {mode} images")
    fig.savefig(path, dpi=100, bbox_inches="tight")
    plt.close(fig)


def save_embedding_figure(session: Session, path):
    """Scatter of the 2-D embedding, blue/red by correctness."""
    coords = np.asarray(session.embedding.coords)
    correct = np.array([e.correct for e in session.entries])
    fig, ax = plt.subplots(figsize=(6, 6))
    for flag, color, label in (
        (True, CORRECT_COLOR, "correct"),
        (False, INCORRECT_COLOR, "incorrect"),
    ):
        pick = correct == flag
        if pick.any():
            ax.scatter(coords[pick, 0], coords[pick, 1], c=color, s=28, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"{session.category_name}: explanation map")
    ax.legend(loc="best")
    fig.savefig(path, dpi=100, bbox_inches="tight")
    plt.close(fig)


def save_loss_curve(losses, path):
    """Training loss trace for the builtin model."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(losses) + 1), losses)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean cross-entropy")
    ax.set_title("builtin model training loss")
    fig.savefig(path, dpi=100, bbox_inches="tight")
    plt.close(fig)
