# app/lab/charts.py
"""Log-log scaling plot for a study summary (needs the ``plot`` extra)."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)


def plot_scaling(summary: pd.DataFrame, fits: pd.DataFrame, path: Path) -> Path:
    import matplotlib  # noqa: PLC0415

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt  # noqa: PLC0415

    fig, ax = plt.subplots(figsize=(7, 5))
    slopes = dict(zip(fits["metric"], fits["slope"], strict=True)) if not fits.empty else {}
    for metric, grp in summary.groupby("metric", sort=True):
        grp = grp[grp["median"] > 0]
        if grp.empty or metric not in slopes:
            continue
        line, = ax.plot(grp["N"], grp["median"], marker="o",
                        label=f"{metric} (slope {slopes[metric]:.2f})")
        lo = grp["q05"].to_numpy()
        hi = grp["q95"].to_numpy()
        ok = np.isfinite(lo) & np.isfinite(hi) & (lo > 0)
        if ok.any():
            ax.fill_between(grp["N"].to_numpy()[ok], lo[ok], hi[ok],
                            color=line.get_color(), alpha=0.15)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("median over replicates")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    log.info("wrote %s", path.name)
    return path
