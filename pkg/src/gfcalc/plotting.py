"""Static figures for CLI reports (written to files, never shown)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _positive(y) -> np.ndarray:
    y = np.abs(np.asarray(y, float))
    return np.where(y > 0, y, np.nan)


def residual_figure(path: Path, rhos, series: dict, title: str = "", reference_order: float | None = 1.0) -> Path:
    """Log-log residual against scale, one line per named series."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    rhos = np.asarray(rhos, float)
    for name, y in series.items():
        ax.loglog(rhos, _positive(y), "o-", label=name)
    if reference_order is not None and series:
        first = _positive(next(iter(series.values())))
        if np.isfinite(first[0]):
            ref = first[0] * (rhos / rhos[0]) ** reference_order
            ax.loglog(rhos, ref, "k:", label=f"slope {reference_order:g}")
    ax.set_xlabel("rho")
    ax.set_ylabel("residual")
    ax.invert_xaxis()
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def profile_figure(path: Path, x, curves: dict, title: str = "") -> Path:
    """Sampled functions on a 1-D grid."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for name, y in curves.items():
        ax.plot(x, y, label=name)
    ax.set_xlabel("x")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def fourier_figure(path: Path, lambdas: Sequence[float], errors, gaps) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.loglog(lambdas, _positive(errors), "o-", label="inversion error")
    ax.loglog(lambdas, _positive(gaps), "s--", label="gap between paths")
    ax.set_xlabel("lambda")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
