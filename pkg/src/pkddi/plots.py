"""Report figures rendered next to the delimited outputs.

Per-metric bar charts mark configurations statistically indistinguishable
from the best with an asterisk, mirroring the summary tables; the pairwise
heatmap shows two-tailed permutation p-values.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_report_figures"]

_METRIC_TITLES = {"f1": "F1", "mcc": "MCC", "iauc": "iAUC"}


def _config_order(bundle: dict) -> list[str]:
    rp = bundle["rank_products"]
    return sorted(rp, key=lambda name: (rp[name], name))


def _performance_figure(bundle: dict, path: Path) -> None:
    order = _config_order(bundle)
    metrics = [m for m in ("f1", "mcc", "iauc") if m in bundle["significance"]] or [
        "f1", "mcc", "iauc"
    ]
    fig, axes = plt.subplots(
        1, len(metrics), figsize=(4.2 * len(metrics), 3.2 + 0.12 * len(order)),
        sharey=False,
    )
    if len(metrics) == 1:
        axes = [axes]
    x = np.arange(len(order))
    for ax, metric in zip(axes, metrics):
        values = [bundle["means"][name][metric] for name in order]
        starred = set(
            bundle["significance"].get(metric, {}).get(
                "indistinguishable_from_best", []
            )
        )
        ax.bar(x, values, color="#4878a8")
        for i, name in enumerate(order):
            if name in starred:
                ax.annotate(
                    "*", (i, values[i]), ha="center", va="bottom", fontsize=12
                )
        ax.set_xticks(x)
        ax.set_xticklabels(order, rotation=60, ha="right", fontsize=7)
        ax.set_title(_METRIC_TITLES[metric])
        lo = min(values)
        ax.set_ylim(max(0.0, lo - 0.05), min(1.02, max(values) + 0.04))
    fig.suptitle("Mean outer-fold performance (* = not significantly below best)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _significance_figure(bundle: dict, path: Path) -> None:
    metrics = sorted(bundle["significance"])
    if not metrics:
        return
    order = _config_order(bundle)
    fig, axes = plt.subplots(
        1, len(metrics), figsize=(4.4 * len(metrics), 4.0)
    )
    if len(metrics) == 1:
        axes = [axes]
    for ax, metric in zip(axes, metrics):
        pairwise = bundle["significance"][metric]["pairwise_two_tailed"]
        n = len(order)
        grid = np.ones((n, n))
        for key, p in pairwise.items():
            a, b = key.split("|")
            if a in order and b in order:
                i, j = order.index(a), order.index(b)
                grid[i, j] = grid[j, i] = p
        im = ax.imshow(grid, vmin=0.0, vmax=1.0, cmap="viridis")
        ax.set_xticks(range(n))
        ax.set_yticks(range(n))
        ax.set_xticklabels(order, rotation=90, fontsize=6)
        ax.set_yticklabels(order, fontsize=6)
        ax.set_title(f"{_METRIC_TITLES[metric]} two-tailed p")
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report_figures(bundle: dict, outdir: str | Path) -> list[Path]:
    """Render performance bars and the significance heatmap as PNG files."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    if bundle.get("means"):
        perf = outdir / "performance.png"
        _performance_figure(bundle, perf)
        written.append(perf)
    if bundle.get("significance"):
        sig = outdir / "significance.png"
        _significance_figure(bundle, sig)
        written.append(sig)
    return written
