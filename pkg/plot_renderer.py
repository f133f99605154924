"""
SVG line charts of objective vs. step, one curve per MetricLog with a
mean +/- std band.
"""
import os
from typing import Dict, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from models import MetricLog  # noqa: E402

# Fixed ids and no timestamp keep the SVG bytes reproducible
matplotlib.rcParams["svg.hashsalt"] = "bmvr"
matplotlib.rcParams["svg.fonttype"] = "path"


def render_svg(logs: Dict[str, MetricLog], path: Union[str, os.PathLike], log_y: bool = False,
               title: Optional[str] = None, reference: Optional[float] = None):
    """
    Args:
        logs: label -> MetricLog, drawn in insertion order
        path: output .svg file
        log_y: logarithmic objective axis
        title: chart title
        reference: horizontal line, e.g. the oracle optimum
    """
    if not logs:
        raise ValueError("nothing to plot")

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    try:
        for label, log in logs.items():
            if not log.rows:
                print(f"WARNING: {label} has no rows, skipped")
                continue
            steps = [row.step for row in log.rows]
            mean = [row.objective_mean for row in log.rows]
            std = [row.objective_std for row in log.rows]
            line, = ax.plot(steps, mean, label=label, linewidth=1.2)
            lower = [m - s for m, s in zip(mean, std)]
            if log_y:
                lower = [max(value, m * 1e-3) for value, m in zip(lower, mean)]
            ax.fill_between(steps, lower, [m + s for m, s in zip(mean, std)],
                            color=line.get_color(), alpha=0.25, linewidth=0)

        if reference is not None:
            ax.axhline(reference, color="black", linestyle="--", linewidth=0.8, label="optimum")
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel("step")
        ax.set_ylabel("objective")
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
