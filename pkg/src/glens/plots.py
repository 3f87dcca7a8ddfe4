"""Matplotlib renderings written next to the delimited report outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_histogram(hist, path) -> None:
    """Default-rate histogram for one metric (count bars + rate line)."""
    fig, ax1 = plt.subplots(figsize=(6, 4))
    n = len(hist.counts)
    mids = [(hist.bin_edges[i] + hist.bin_edges[i + 1]) / 2 for i in range(n)]
    widths = [(hist.bin_edges[i + 1] - hist.bin_edges[i]) * 0.9 or 0.1 for i in range(n)]
    ax1.bar(mids, hist.counts, width=widths, color="#9ecae1", label="nodes")
    ax1.set_xlabel(hist.kind)
    ax1.set_ylabel("node count")
    ax2 = ax1.twinx()
    xs = [m for m, r in zip(mids, hist.rates) if r is not None]
    ys = [r for r in hist.rates if r is not None]
    ax2.plot(xs, ys, "o-", color="#de2d26", label="default rate")
    ax2.set_ylabel("default rate")
    ax2.set_ylim(0, 1)
    fig.suptitle(f"Default rate by {hist.kind}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_treemap(layout, stats, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    cmap = plt.get_cmap("Reds")
    for label, (x, y, w, h) in layout.rects.items():
        cs = stats.get(label)
        rate = (cs.ratio_default_firms or 0.0) if cs else 0.0
        ax.add_patch(plt.Rectangle((x, y), w, h, facecolor=cmap(rate),
                                   edgecolor="white", linewidth=1.5))
        if w * h > 0.01:
            ax.text(x + w / 2, y + h / 2, f"{label}\n{rate:.0%}",
                    ha="center", va="center", fontsize=8)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.axis("off")
    fig.suptitle("Communities by default rate")
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_heatmap(grid, path) -> None:
    fig, ax = plt.subplots(figsize=(max(4, len(grid.columns) * 0.5),
                                    max(3, len(grid.rows) * 0.12)))
    data = np.full((len(grid.rows), len(grid.columns)), np.nan)
    for i, ent in enumerate(grid.rows):
        for j, col in enumerate(grid.columns):
            if (ent, col) in grid.cells:
                data[i, j] = grid.cells[(ent, col)]
    im = ax.imshow(data, aspect="auto", cmap="YlOrRd", vmin=0, vmax=1)
    ax.set_xticks(range(len(grid.columns)))
    ax.set_xticklabels([str(c) for c in grid.columns], rotation=45, fontsize=6)
    ax.set_yticks([])
    ax.set_xlabel("window end")
    ax.set_ylabel(f"{len(grid.rows)} enterprises")
    fig.colorbar(im, label="predicted default probability")
    fig.suptitle("Rolling default risk")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
