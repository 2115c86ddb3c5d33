"""Figure rendering for experiment reports.

Every experiment writes one SVG next to its CSV.  Output must be
byte-reproducible, so the SVG hash salt is pinned and the date metadata
stripped before saving.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SALT = "qctl"


def _new_axes(xlabel: str, ylabel: str, title: str):
    plt.rcParams["svg.hashsalt"] = _SALT
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_curves(path: str, x_label: str, y_label: str, title: str,
                curves: list[tuple[str, np.ndarray, np.ndarray]],
                logx: bool = False, logy: bool = False,
                fit_line: tuple[float, float] | None = None) -> None:
    """Polyline plot; ``fit_line`` adds a dashed log-log reference line
    exp(intercept) * x^slope labeled with the fitted slope."""
    fig, ax = _new_axes(x_label, y_label, title)
    for label, x, y in curves:
        ax.plot(np.asarray(x), np.asarray(y), marker="o" if len(np.asarray(x)) <= 64 else None,
                markersize=3.5, linewidth=1.2, label=label or None)
    if fit_line is not None:
        slope, intercept = fit_line
        xs = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in curves])
        xx = np.linspace(np.min(xs), np.max(xs), 64)
        ax.plot(xx, np.exp(intercept) * xx**slope, linestyle="--", linewidth=1.0,
                label=f"fit: slope {slope:.3f}")
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    if any(label for label, _, _ in curves) or fit_line is not None:
        ax.legend(loc="best", fontsize=9)
    _save(fig, path)
