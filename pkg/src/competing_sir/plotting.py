"""Figures written next to the CSV artifacts.

Uses ``matplotlib.figure.Figure`` directly so nothing depends on a GUI
backend or on pyplot's global state.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .model import ModelConfig, Trajectory
from .observer import ObserverRun

FIG_WIDTH = 3.4  # inches, one column
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _figsize(ncols=1, scale=1.0):
    w = FIG_WIDTH * ncols * scale
    return (w, FIG_WIDTH * scale * GOLDEN * 1.1)


def _per_virus_panels(series: np.ndarray, config: ModelConfig, ylabel: str, path: Path,
                      logy: bool = False) -> Path:
    """One panel per virus, one line per node. ``series`` is ``(T, m, n)``."""
    m = config.m
    fig = Figure(figsize=_figsize(ncols=m), constrained_layout=True)
    axes = fig.subplots(1, m, squeeze=False)[0]
    t = np.arange(series.shape[0])
    for k, ax in enumerate(axes):
        for i, node in enumerate(config.labels):
            vals = np.abs(series[:, k, i]) if logy else series[:, k, i]
            ax.plot(t, vals, lw=1.0, label=node)
        if logy:
            ax.set_yscale("log")
        ax.set_title(config.virus_labels[k], fontsize=9)
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        ax.tick_params(labelsize=7)
    axes[-1].legend(fontsize=6, frameon=False)
    path = Path(path)
    fig.savefig(path, dpi=150)
    return path


def plot_infections(traj: Trajectory, config: ModelConfig, path) -> Path:
    """Infection level of every virus at every node over time."""
    return _per_virus_panels(traj.x, config, "infected fraction", path)


def plot_estimation_error(run: ObserverRun, config: ModelConfig, path, logy: bool = False) -> Path:
    """Observer error ``x - x_hat`` per virus and node."""
    label = "|x - x_hat|" if logy else "x - x_hat"
    return _per_virus_panels(run.errors, config, label, path, logy=logy)


def plot_singular_values(singular_values: np.ndarray, threshold: float, path) -> Path:
    fig = Figure(figsize=_figsize(), constrained_layout=True)
    ax = fig.subplots()
    idx = np.arange(1, singular_values.size + 1)
    ax.semilogy(idx, np.maximum(singular_values, np.finfo(float).tiny), "o-", ms=3)
    ax.axhline(max(threshold, np.finfo(float).tiny), color="k", ls="--", lw=0.8, label="rank threshold")
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.legend(fontsize=7, frameon=False)
    path = Path(path)
    fig.savefig(path, dpi=150)
    return path


def plot_sweep(keys, columns: dict, xlabel: str, path) -> Path:
    """Line plot of each named metric column against the grid values."""
    fig = Figure(figsize=_figsize(), constrained_layout=True)
    ax = fig.subplots()
    for name, vals in columns.items():
        ax.plot(keys, vals, "o-", ms=3, label=name)
    ax.set_xlabel(xlabel)
    ax.legend(fontsize=7, frameon=False)
    path = Path(path)
    fig.savefig(path, dpi=150)
    return path
