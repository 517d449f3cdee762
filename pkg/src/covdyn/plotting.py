"""Figures for reports, rendered off-screen with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def convergence_plot(series, path, xlabel="step", ylabel="defect", title=None, reference_slopes=()):
    """Log-log plot of ``{label: (levels, defects)}`` with optional reference slopes."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, (lv, dv) in series.items():
        dv = np.maximum(np.asarray(dv, float), 1e-300)
        ax.loglog(lv, dv, "o-", label=label)
    for p in reference_slopes:
        lv = np.asarray(next(iter(series.values()))[0], float)
        dv = np.asarray(next(iter(series.values()))[1], float)
        ref = dv[0] * (lv / lv[0]) ** p
        ax.loglog(lv, ref, "k--", lw=0.8, label=f"slope {p:g}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def trajectory_plot(motion, path, title=None, every=None):
    """Configurations in chart coordinates: curves for d=1 bodies, point clouds for d=2."""
    vals = motion.values
    T = vals.shape[0]
    every = every or max(1, T // 10)
    fig, ax = plt.subplots(figsize=(5, 4))
    cmap = plt.get_cmap("viridis")
    m = vals.shape[-1]
    for n in range(0, T, every):
        c = cmap(n / max(T - 1, 1))
        v = vals[n].reshape(-1, m)
        if m == 1:
            ax.plot(motion.grid.x.reshape(-1, motion.grid.d)[:, 0], v[:, 0], color=c)
        elif motion.grid.d == 1:
            ax.plot(v[:, 0], v[:, 1], color=c)
        else:
            ax.plot(v[:, 0], v[:, 1], ".", ms=1.5, color=c)
    if m == 1:
        ax.set_xlabel("x1")
        ax.set_ylabel("y1")
    else:
        ax.set_xlabel("y1")
        ax.set_ylabel("y2")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def field_comparison_plot(x, fields, path, title=None):
    """Overlay 1-D component profiles ``{label: values[..., k]}`` along the body."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, f in fields.items():
        f = np.asarray(f)
        for k in range(f.shape[-1]):
            ax.plot(x, f[..., k], label=f"{label}[{k}]")
    ax.set_xlabel("x1")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def series_plot(series, path, xlabel="t", ylabel="value", title=None, logy=False):
    """Line plot of ``{label: (x, y)}``."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, (xv, yv) in series.items():
        (ax.semilogy if logy else ax.plot)(xv, yv, "o-" if logy else "-", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
