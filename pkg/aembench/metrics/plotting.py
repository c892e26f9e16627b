"""Plotting helpers.

Quicklook PNGs of the r_T curves; the curve CSV is the source of truth.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from aembench.metrics.resim import RTCurve  # noqa: E402


def plot_rt_curves(curves: Sequence[RTCurve], out: Union[str, Path], title: str = "") -> None:
    """r_T vs T on log axes with 25th-75th percentile bands."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for c in curves:
        line = ax.plot(c.T, c.r, label=c.solver)[0]
        ax.fill_between(c.T, c.p25, c.p75, color=line.get_color(), alpha=0.2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("T")
    ax.set_ylabel("r_T (re-simulation MSE)")
    if title:
        ax.set_title(title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
