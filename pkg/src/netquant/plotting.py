"""Figures for the CLI report paths, rendered to files with the Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import CoexpressionBins, StudyRow, log_expression  # noqa: E402


def _save(fig, path) -> None:
    path = Path(path)
    # drop creation dates so reruns give identical files
    suffix = path.suffix.lower()
    meta = {"Software": None} if suffix == ".png" else {}
    if suffix == ".svg":
        meta["Date"] = None
    elif suffix == ".pdf":
        meta["CreationDate"] = None
    fig.savefig(path, metadata=meta, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_bins(bins: CoexpressionBins, path, label: str = "") -> None:
    """Adjacent pairs per correlation bin, with the density baseline."""
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(1, bins.counts.size + 1)
    ax.plot(x, bins.counts, marker="o", ms=3, lw=1, label=label or "observed")
    ax.axhline(bins.baseline, color="grey", ls="--", lw=1, label="density baseline")
    ax.set_xlabel(f"bin of {bins.bin_size} pairs (decreasing correlation)")
    what = "adjacent" if bins.distance == 1 else "within two steps"
    ax.set_ylabel(f"pairs {what}")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_convergence(round_objective: Sequence[float], path,
                     gene_trajectory: Sequence[tuple] | None = None) -> None:
    """Objective after each round, and optionally after every gene visit."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if gene_trajectory:
        y = [t[3] for t in gene_trajectory]
        ax.plot(np.arange(1, len(y) + 1) / max(1, len(y)) * (len(round_objective) - 1),
                y, lw=0.8, alpha=0.6, label="per gene update")
    ax.plot(np.arange(len(round_objective)), round_objective, marker="o", ms=4, label="per round")
    ax.set_xlabel("round")
    ax.set_ylabel("log pseudo-likelihood")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_objective(trace: Sequence[float], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(len(trace)), trace, lw=1)
    ax.set_xlabel("accepted step")
    ax.set_ylabel("penalized log-likelihood")
    _save(fig, path)


def plot_scatter(estimate: np.ndarray, other: np.ndarray, path, correlation: float | None = None,
                 xlabel: str = "other", ylabel: str = "estimate") -> None:
    """log2(x + 1) scatter of two expression vectors."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    x, y = log_expression(other), log_expression(estimate)
    ax.scatter(x, y, s=6, alpha=0.6, lw=0)
    hi = float(max(x.max(initial=0), y.max(initial=0)))
    ax.plot([0, hi], [0, hi], color="grey", lw=0.8, ls="--")
    ax.set_xlabel(f"log2({xlabel} + 1)")
    ax.set_ylabel(f"log2({ylabel} + 1)")
    if correlation is not None:
        ax.set_title(f"r = {correlation:.4f}")
    _save(fig, path)


def plot_study(rows: Sequence[StudyRow], path) -> None:
    """Correlation with truth per method or perturbed network."""
    fig, ax = plt.subplots(figsize=(6, 4))
    randomized = [r.correlation for r in rows if r.label == "randomized"]
    fixed = [r for r in rows if r.label != "randomized"]
    if randomized:
        ax.hist(randomized, bins=min(20, max(5, len(randomized) // 5)), color="lightgrey",
                label="randomized networks")
        for r in fixed:
            ax.axvline(r.correlation, lw=1.5, label=r.label)
        ax.set_xlabel("correlation with truth")
        ax.set_ylabel("networks")
        ax.legend(frameon=False)
    else:
        ax.plot(range(len(fixed)), [r.correlation for r in fixed], marker="o")
        ax.set_xticks(range(len(fixed)), [r.label for r in fixed], rotation=30, ha="right")
        ax.set_ylabel("correlation with truth")
    _save(fig, path)
