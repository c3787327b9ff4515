"""Deterministic PNG figures (Agg backend, no software stamp in the metadata)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PNG_METADATA = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=100, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def field_plot(values, grid, path, title):
    """Filled contours of a node field over the unit square."""
    X1, X2 = grid.mesh()
    fig, ax = plt.subplots(figsize=(5, 4))
    cs = ax.contourf(X1, X2, values, levels=21, cmap="viridis")
    fig.colorbar(cs, ax=ax)
    ax.set_xlabel("xi1")
    ax.set_ylabel("xi2")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def series_plot(t, curves: dict, path, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, y in curves.items():
        ax.plot(t, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def convergence_plot(report, path):
    """Log-log errors, closure defect and coefficient ratios against the film ratio."""
    eps = np.asarray(report.eps)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps, report.err_inf, "o-", label=f"limit mismatch (slope {report.slopes['err_inf']:.2f})")
    ax.loglog(eps, report.closure, "s-", label=f"closure defect (slope {report.slopes['closure']:.2f})")
    ax.set_xlabel("eps")
    ax.set_ylabel("max norm")
    ax.legend(fontsize=8)
    ax.set_title(f"{report.scenario}: {report.regime} regime")
    fig.tight_layout()
    return _save(fig, path)
