"""Render metric series and rasters to PNG files next to the CSV exports.

Import is deferred and the Agg backend forced so headless runs work and
nothing here touches a display. Disable via report.figures when only the
CSVs are wanted.
"""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    return plt


def save_lines(path, series, columns=None, xlabel=None, ylabel="", title=""):
    """Line plot of MetricSeries columns over its index -> PNG at path."""
    plt = _pyplot()
    names = list(series.columns) if columns is None else list(columns)
    fig, ax = plt.subplots(figsize=(7, 4))
    for name in names:
        ax.plot(series.index, series.columns[name], label=name)
    ax.set_xlabel(xlabel if xlabel is not None else series.index_name)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(names) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_raster_plot(path, bits, title=""):
    """Spike raster dots, one row per neuron, time along x -> PNG at path."""
    plt = _pyplot()
    bits = np.asarray(bits)
    fig, ax = plt.subplots(figsize=(7, 3))
    neurons, steps = np.nonzero(bits)
    ax.scatter(steps, neurons, s=4, marker="|")
    ax.set_xlabel("t")
    ax.set_ylabel("neuron")
    ax.set_xlim(-0.5, bits.shape[1] - 0.5)
    ax.set_ylim(bits.shape[0] - 0.5, -0.5)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
