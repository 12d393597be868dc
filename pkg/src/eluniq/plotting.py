"""Line plots of per-element traces, written as 640x240 SVG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

WIDTH_IN, HEIGHT_IN, DPI = 6.4, 2.4, 100

_STYLES = ("-", "--", ":", "-.")


def plot_traces(path, traces: dict, ylabel: str, title: str | None = None, xlabel: str = "sample number k") -> None:
    """One polyline per named trace.

    A trace is either a y-array, drawn against 1-based sample numbers, or
    an ``(x, y)`` pair.
    """
    plt.rcParams["svg.hashsalt"] = "eluniq"  # stable element ids across runs
    fig, ax = plt.subplots(figsize=(WIDTH_IN, HEIGHT_IN), dpi=DPI)
    for i, (label, ys) in enumerate(traces.items()):
        if isinstance(ys, tuple):
            xs, ys = (np.asarray(v, dtype=float) for v in ys)
        else:
            ys = np.asarray(ys, dtype=float)
            xs = np.arange(1, ys.size + 1)
        ax.plot(xs, ys, _STYLES[i % len(_STYLES)], linewidth=1.4, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7, loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
