"""Report figures rendered alongside the delimited outputs.

Everything draws through the Agg backend and writes PNG files; nothing
here opens a window. Figures are a convenience layer over the CSV plot
data, so failures to render are reported but never fatal to a run.
"""

from __future__ import annotations

from typing import Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .aggregates import LorenzCurve, gini_from_curve
from .appraisal import AppraisalReport
from .bounds import ImprovementStats

__all__ = ["lorenz_figure", "error_rate_figure", "improvement_figure"]

_PNG_META = {"Software": "ppbounds"}


def lorenz_figure(curves: Mapping[str, LorenzCurve], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    for name, curve in curves.items():
        label = f"{name} (gini {gini_from_curve(curve):.3f})"
        ax.plot(curve.points[:, 0], curve.points[:, 1], label=label)
    ax.plot([0, 1], [0, 1], color="grey", linestyle="--", linewidth=1, label="equality")
    ax.set_xlabel("cumulative population share")
    ax.set_ylabel("cumulative expenditure share")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)


def error_rate_figure(reports: Mapping[str, AppraisalReport], path) -> None:
    """Bar chart of error rates with magnitude markers."""
    methods = list(reports)
    rates = [100 * reports[m].error_rate for m in methods]
    magnitudes = [100 * reports[m].error_magnitude for m in methods]
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = np.arange(len(methods))
    ax.bar(xs, rates, width=0.6, color="seagreen", label="error rate (%)")
    ax.scatter(xs, magnitudes, marker="D", color="black", zorder=3, label="error magnitude (%)")
    ax.set_xticks(xs)
    ax.set_xticklabels(methods, rotation=20, ha="right")
    ax.set_ylabel("percent")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)


def improvement_figure(stats: ImprovementStats, path) -> None:
    """Distribution of per-pair bound tightening, split by side."""
    lower = stats.pair_lower_share[np.isfinite(stats.pair_lower_share)]
    upper = stats.pair_upper_share[np.isfinite(stats.pair_upper_share)]
    fig, ax = plt.subplots(figsize=(7, 4))
    bins = np.linspace(0.0, 1.0, 41)
    if lower.size:
        ax.hist(100 * lower, bins=100 * bins, alpha=0.6, label="lower bound", color="steelblue")
    if upper.size:
        ax.hist(100 * upper, bins=100 * bins, alpha=0.6, label="upper bound", color="darkorange")
    ax.set_xlabel("tightening (% of classical width)")
    ax.set_ylabel("country pairs")
    if np.isfinite(stats.mean_width_improvement):
        ax.set_title(f"mean width improvement {100 * stats.mean_width_improvement:.1f}%")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)
