"""Figure and CSV rendering for the CLI's report paths.

Figures are written as SVG with a fixed hash salt and no timestamp
metadata, so identical inputs produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "kpsign"

import matplotlib.pyplot as plt

from .evaluate import PerClassReport
from .windows import Window

_SAVE_KW = {"metadata": {"Date": None}, "format": "svg"}


def _finish(fig, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_window_overlay(
    path: Union[str, Path],
    before: Window,
    after: Window,
    title: str,
    frame_picks: Sequence[int] = (0, -1),
) -> None:
    """Before/after keypoint scatter for a couple of frames of a window,
    original in grey underneath, augmented on top."""
    fig, axes = plt.subplots(1, len(frame_picks), figsize=(4.5 * len(frame_picks), 4.5))
    if len(frame_picks) == 1:
        axes = [axes]
    for ax, pick in zip(axes, frame_picks):
        fb, fa = before.frames[pick], after.frames[pick]
        ax.scatter(fb.coords[:, 0], fb.coords[:, 1], s=6, c="0.65", label="original")
        ax.scatter(fa.coords[:, 0], fa.coords[:, 1], s=6, c="tab:red", label="augmented")
        ax.set_xlim(0, fb.width)
        ax.set_ylim(fb.height, 0)  # image coordinates: y grows downwards
        ax.set_aspect("equal")
        ax.set_title(f"frame {fb.frame_index}")
        ax.legend(loc="lower right", fontsize=8)
    fig.suptitle(title)
    _finish(fig, path)


def write_overlay_csv(path: Union[str, Path], before: Window, after: Window) -> None:
    """Per-keypoint coordinates before and after augmentation."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "keypoint", "x_before", "y_before", "x_after", "y_after"])
        for fb, fa in zip(before.frames, after.frames):
            for k in range(before.k):
                writer.writerow([
                    fb.frame_index, k,
                    repr(float(fb.coords[k, 0])), repr(float(fb.coords[k, 1])),
                    repr(float(fa.coords[k, 0])), repr(float(fa.coords[k, 1])),
                ])


def save_training_curves(path: Union[str, Path], history) -> None:
    """Loss and validation accuracy per epoch."""
    epochs = [r.epoch for r in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(epochs, [r.train_loss for r in history], label="train loss")
    ax1.plot(epochs, [r.val_loss for r in history], label="val loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("cross-entropy")
    ax1.legend()
    ax2.plot(epochs, [r.val_top1 for r in history], label="val top-1")
    ax2.plot(epochs, [r.val_top5 for r in history], label="val top-5")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("accuracy")
    ax2.set_ylim(0, 1.02)
    ax2.legend()
    fig.tight_layout()
    _finish(fig, path)


def write_history_csv(path: Union[str, Path], history) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_top1", "val_top5", "wall_seconds"])
        for r in history:
            writer.writerow([r.epoch, r.train_loss, r.val_loss, r.val_top1, r.val_top5, r.wall_seconds])


def save_per_class_figure(path: Union[str, Path], report: PerClassReport) -> None:
    """Bar chart of per-class accuracy; unsupported classes shown empty."""
    labels = [c.label for c in report.classes]
    values = [c.accuracy if c.accuracy is not None else 0.0 for c in report.classes]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.3 * len(labels)), 3.5))
    ax.bar(labels, values, color="tab:blue")
    for c in report.classes:
        if c.support == 0:
            ax.annotate("n/a", (c.label, 0.02), ha="center", fontsize=7, rotation=90)
    ax.set_xlabel("class")
    ax.set_ylabel("top-1 accuracy")
    ax.set_ylim(0, 1.02)
    fig.tight_layout()
    _finish(fig, path)


def write_metrics_csv(
    path: Union[str, Path],
    split: str,
    n_samples: int,
    loss: float,
    top1: float,
    top5: float,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["split", split])
        writer.writerow(["n_samples", n_samples])
        writer.writerow(["loss", repr(loss)])
        writer.writerow(["top1", repr(top1)])
        writer.writerow(["top5", repr(top5)])


def write_per_class_csv(path: Union[str, Path], report: PerClassReport) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "support", "correct", "accuracy"])
        for c in report.classes:
            acc = "" if c.accuracy is None else repr(c.accuracy)
            writer.writerow([c.label, c.support, c.correct, acc])
        writer.writerow([])
        writer.writerow(["true", "predicted", "count"])
        for t, p, n in report.confusions:
            writer.writerow([t, p, n])
