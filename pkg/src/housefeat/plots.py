"""SVG charts for importances and experiment reports."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .records import MLS_FEATURES  # noqa: E402

# Fixed salt and no date stamp keep SVG output stable across runs.
matplotlib.rcParams["svg.hashsalt"] = "housefeat"
_SVG_META = {"Date": None, "Creator": None}


def importance_chart(importances: dict[str, float], path: str | os.PathLike, title: str = "") -> None:
    """Horizontal bars sorted by gain; basic MLS predictors are outlined."""
    items = sorted(importances.items(), key=lambda kv: (-kv[1], kv[0]))
    names = [k for k, _ in items]
    vals = np.array([v for _, v in items], dtype=float)
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.22 * len(names) + 1)))
    bars = ax.barh(np.arange(len(names)), vals, color="#7a9cc6")
    for bar, name in zip(bars, names):
        if name in MLS_FEATURES:
            bar.set_edgecolor("black")
            bar.set_linewidth(1.5)
            bar.set_facecolor("#e0a458")
    ax.set_yticks(np.arange(len(names)), names, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("total split gain")
    if vals.size and vals.max() <= 0:
        ax.set_xlim(0, 1)
    ax.set_title(title or "feature importance (MLS predictors outlined)")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def experiment_chart(report, path: str | os.PathLike) -> None:
    """Grouped bars of the best test R^2 per combination, one group per target."""
    combos = report.combinations()
    targets = list(dict.fromkeys(r.target for r in report.rows))
    width = 0.8 / max(1, len(targets))
    fig, ax = plt.subplots(figsize=(max(5, 0.9 * len(combos) + 2), 4))
    x = np.arange(len(combos))
    for i, t in enumerate(targets):
        vals = [report.best(c, t).r2 for c in combos]
        ax.bar(x + (i - (len(targets) - 1) / 2) * width, vals, width, label=t)
    ax.set_xticks(x, combos, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("test R$^2$ (best model)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
