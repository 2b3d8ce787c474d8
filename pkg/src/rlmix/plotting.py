"""Static SVG line and bar charts written next to the CSV output."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLES = ["-", "--", "-.", ":"]

# fixed salt and no timestamp keep repeated runs byte-identical
matplotlib.rcParams["svg.hashsalt"] = "rlmix"


def _save(fig, path) -> Path:
    path = Path(path).with_suffix(".svg")
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def line_chart(
    path,
    x,
    series: Mapping[str, Sequence[float]],
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = False,
    logy: bool = False,
    vlines: Sequence[float] = (),
    title: str | None = None,
) -> Path:
    """One panel with one line per entry of ``series`` (shared or per-series x).

    ``x`` may be a single array or a mapping with the same keys as ``series``.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, (label, y) in enumerate(series.items()):
        xs = x[label] if isinstance(x, Mapping) else x
        y = np.asarray(y, dtype=float)
        ax.plot(xs, y, STYLES[i % len(STYLES)], color="k", lw=1.2, label=label)
    for xv in vlines:
        ax.axvline(xv, color="0.5", ls="--", lw=0.8)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def scatter_branches(path, x, y, xlabel: str = "", ylabel: str = "", vlines: Sequence[float] = ()) -> Path:
    """Points ``(x_i, y_i)``; used for eigenvalue branches versus a parameter."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, y, ".", color="k", ms=1.5)
    for xv in vlines:
        ax.axvline(xv, color="0.5", ls="--", lw=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return _save(fig, path)


def bar_chart(path, categories, series: Mapping[str, Sequence[float]], xlabel: str = "", ylabel: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    n = len(series)
    width = 0.8 / max(n, 1)
    pos = np.arange(len(categories))
    for i, (label, y) in enumerate(series.items()):
        ax.bar(pos + (i - (n - 1) / 2) * width, y, width, label=label,
               color=str(0.2 + 0.6 * i / max(n - 1, 1)))
    ax.set_xticks(pos)
    ax.set_xticklabels([str(c) for c in categories], fontsize=7)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if n > 1:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
