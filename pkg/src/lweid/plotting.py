"""Figures for the `report` subcommand.  Everything renders to files (Agg)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def size(scale=1.0):
    width = 6.0 * scale
    return width, width * (math.sqrt(5) - 1) / 2


def new(scale=1.0, nrows=1, ncols=1):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(nrows, ncols, figsize=size(scale))
    return fig, ax


def save(fig, path):
    with plt.rc_context(RC):
        fig.savefig(path)
    plt.close(fig)
    return path


def plot_soundness(estimates, path):
    """Running acceptance rate of the cheating prover against its bound."""
    fig, ax = new()
    for est in estimates:
        k = np.arange(1, est.trials + 1)
        running = np.cumsum(est.history) / k
        line, = ax.plot(k, running, lw=1, label=f"{est.scheme} (r={est.rounds_per_trial})")
        ax.axhline(float(est.theoretical), color=line.get_color(), ls="--", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("trials")
    ax.set_ylabel("cheating acceptance rate")
    ax.legend(frameon=False)
    return save(fig, path)


def plot_pvalues(results, path, title=""):
    """-log10 p per statistic, with the 0.01 threshold marked."""
    fig, ax = new()
    names = [r.statistic for r in results]
    vals = [-math.log10(max(r.p, 1e-300)) for r in results]
    ax.barh(names, vals, color="0.4")
    ax.axvline(2.0, color="tab:red", lw=0.8, ls="--")
    ax.set_xlabel("-log10 p")
    ax.set_title(title)
    ax.invert_yaxis()
    return save(fig, path)


def plot_costs(costs, path):
    """Stacked per-round bits by scheme and accounting mode."""
    fig, ax = new()
    labels = [f"{scheme}\n{c.mode}" for scheme, c in costs]
    parts = [("commitments", "commitments_bits"), ("challenge", "challenge_bits"),
             ("answer", "answer_bits_avg")]
    bottom = np.zeros(len(costs))
    for label, attr in parts:
        vals = np.array([float(getattr(c, attr)) for _, c in costs])
        ax.bar(labels, vals, bottom=bottom, label=label)
        bottom += vals
    ax.set_ylabel("bits per round (average)")
    ax.legend(frameon=False)
    return save(fig, path)
