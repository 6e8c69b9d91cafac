"""PNG rendering of CSV curves (matplotlib, headless)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read_curve(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """``(x, y)`` from a two-column CSV with a header; ``nan`` rows are kept as gaps."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float)
    data = np.atleast_2d(data)
    return data[:, 0], data[:, 1]


def plot_curves(
    curves: Sequence[tuple[str, Path]],
    png: Path,
    title: str,
    ylim: tuple[float, float] | None = None,
    xlim: tuple[float, float] | None = None,
    styles: Sequence[str] | None = None,
) -> Path:
    """Plot each labelled CSV on one set of axes and save next to the data."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, (label, path) in enumerate(curves):
        x, y = read_curve(Path(path))
        style = styles[i] if styles else "-"
        ax.plot(x, y, style, lw=1.2, label=label)
    if ylim is not None:
        ax.set_ylim(*ylim)
    if xlim is not None:
        ax.set_xlim(*xlim)
    ax.set_xlabel("x")
    ax.set_ylabel("V(x)")
    ax.set_title(title)
    ax.axhline(0.0, color="0.8", lw=0.6, zorder=0)
    ax.legend(frameon=False)
    fig.tight_layout()
    png = Path(png)
    tmp = png.with_name(f".{png.name}.tmp.png")
    fig.savefig(tmp, dpi=120)
    plt.close(fig)
    tmp.replace(png)
    return png
