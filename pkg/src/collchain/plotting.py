"""Static SVG line charts. Needs matplotlib, which is an optional dependency."""
from __future__ import annotations

import numpy as np


def line_plot(path, x, series: dict, xlabel: str, ylabel: str, logy: bool = False) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, y in series.items():
        style = "--" if name.startswith("reference") or name.startswith("beta_reservoir") else "-"
        ax.plot(x, np.real(y), style, label=name)
    ax.set_xscale("log" if np.all(np.asarray(x) > 0) else "linear")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
