"""Report figures.

Figures are written as SVG with the date stamp removed and a fixed element-id
salt, so rerunning a command rewrites byte-identical files.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "elastic-fusion",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def figure(width=4.5, height=None):
    golden = (math.sqrt(5) - 1.0) / 2.0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, height or width * golden))
    return fig, ax


def save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_ring(instance, w, path, tour=None, title=None):
    """Cities, the elastic ring and, optionally, the extracted tour."""
    fig, ax = figure(4.0, 4.0)
    xy = instance.coords
    ring = np.vstack([w, w[:1]])
    ax.plot(ring[:, 0], ring[:, 1], "-", color="0.55", lw=0.8, marker=".", ms=3)
    if tour is not None:
        loop = xy[list(tour.order) + [tour.order[0]]]
        ax.plot(loop[:, 0], loop[:, 1], "-", color="tab:red", lw=1.0, alpha=0.7)
    ax.plot(xy[:, 0], xy[:, 1], "o", color="black", ms=4)
    ax.set_aspect("equal", adjustable="datalim")
    if title:
        ax.set_title(title)
    return save(fig, path)


def plot_trace(records, path):
    """Range, energy and swept area against annealing stage."""
    stage = [r.stage for r in records]
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(4.5, 5.0))
    series = [
        ([r.lam for r in records], "range", True),
        ([r.energy for r in records], "energy", False),
        ([r.swept_area for r in records], "swept area", False),
    ]
    for ax, (ys, label, logy) in zip(axes, series):
        ax.plot(stage, ys, lw=1.0)
        ax.set_ylabel(label)
        if logy:
            ax.set_yscale("log")
    axes[-1].set_xlabel("stage")
    fig.tight_layout()
    return save(fig, path)


def plot_posterior(ensemble, path):
    fig, ax = figure()
    k = len(ensemble.labels)
    ax.bar(range(k), ensemble.posterior, color="tab:blue")
    ax.set_xlabel("explanation (by cost)")
    ax.set_ylabel("posterior")
    ax.set_ylim(0, 1.05)
    ax.set_xticks(range(k))
    return save(fig, path)


def plot_bench(rows, path):
    """Best-of-seeds length ratio per instance size."""
    fig, ax = figure()
    sizes = sorted({r["N"] for r in rows})
    best = [min(r["ratio"] for r in rows if r["N"] == n) for n in sizes]
    mean = [float(np.mean([r["ratio"] for r in rows if r["N"] == n])) for n in sizes]
    ax.plot(sizes, best, "o-", label="best of seeds")
    ax.plot(sizes, mean, "s--", label="mean over seeds")
    ax.axhline(1.0, color="0.6", lw=0.8)
    ax.set_xlabel("cities")
    ax.set_ylabel("length / optimum")
    ax.legend(frameon=False)
    return save(fig, path)


def plot_som(state, path):
    fig, ax = figure()
    ax.plot(np.arange(state.n), state.w, "o-", ms=3)
    ax.set_xlabel("node")
    ax.set_ylabel("feature value")
    return save(fig, path)
