"""
Offline plots of finished runs: accuracy per round and accuracy per Byzantine fraction.
"""

import logging
import os
from typing import Dict, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from fedcom.errors import MissingColumnError  # noqa: E402

logger = logging.getLogger(__name__)


def _require(frame: pd.DataFrame, columns: Sequence[str], source: str) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise MissingColumnError(f"{source} lacks column(s) {missing}")


def plot_round_curves(metrics: Dict[str, str], output_path: str, title: str = "Accuracy per round") -> str:
    """
    Plot benign (solid) and poisoned-eval (dashed) accuracy per round.

    Args:
        metrics: Label -> path of a metrics.csv file
        output_path: Image file to write (format from the extension)
        title: Figure title

    Returns:
        output_path
    """
    plt.figure(figsize=(10, 6))
    colors = plt.cm.tab10(np.linspace(0, 1, max(len(metrics), 1)))
    for color, (label, path) in zip(colors, metrics.items()):
        frame = pd.read_csv(path)
        _require(frame, ["round", "benign_acc", "poison_acc"], path)
        plt.plot(frame["round"], frame["benign_acc"], "-", color=color, linewidth=2, label=f"{label} (benign)")
        if frame["poison_acc"].notna().any():
            plt.plot(frame["round"], frame["poison_acc"], "--", color=color, linewidth=1.5, label=f"{label} (poisoned)")

    plt.title(title, fontsize=16)
    plt.xlabel("Round", fontsize=14)
    plt.ylabel("Accuracy", fontsize=14)
    plt.ylim(0, 1.02)
    plt.grid(True, linestyle="--", alpha=0.7)
    plt.legend(fontsize=10)
    plt.tight_layout()
    return _save(output_path)


def plot_sweep(sweeps: Dict[str, str], output_path: str, title: str = "Accuracy vs. Byzantine fraction") -> str:
    """
    Plot final benign accuracy against the Byzantine fraction, one line per sweep.csv.
    """
    plt.figure(figsize=(10, 6))
    markers = ["o", "s", "^", "D", "v", "P"]
    for i, (label, path) in enumerate(sweeps.items()):
        frame = pd.read_csv(path)
        _require(frame, ["byzantine_fraction", "final_benign_acc"], path)
        percent = frame["byzantine_fraction"] * 100.0
        plt.plot(percent, frame["final_benign_acc"], marker=markers[i % len(markers)], linewidth=2, label=label)

    plt.title(title, fontsize=16)
    plt.xlabel("Byzantine workers (%)", fontsize=14)
    plt.ylabel("Final benign accuracy", fontsize=14)
    plt.ylim(0, 1.02)
    plt.grid(True, linestyle="--", alpha=0.7)
    plt.legend(fontsize=10)
    plt.tight_layout()
    return _save(output_path)


def _save(output_path: str) -> str:
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    plt.savefig(output_path, dpi=120)
    plt.close()
    logger.info(f"Saved plot to {output_path}")
    return output_path
