"""SVG learning curves with shaded confidence bands."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .aggregate import AggregateCurve  # noqa: E402


def emit_plot(curves: Sequence[AggregateCurve], path: str | Path, title: str = "",
              ylabel: str = "validation score (best so far)") -> None:
    if not curves:
        raise ValueError("nothing to plot")
    # Fixed hash salt and no date stamp keep the SVG byte-stable for equal input.
    with matplotlib.rc_context({"svg.hashsalt": "eyal-curves", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for i, curve in enumerate(curves):
            steps = [p.step for p in curve.points]
            color = f"C{i % 10}"
            ax.plot(steps, [p.mean for p in curve.points], color=color,
                    label=curve.label or f"curve {i}")
            ax.fill_between(steps, [p.ci_low for p in curve.points],
                            [p.ci_high for p in curve.points], color=color, alpha=0.2, linewidth=0)
        ax.set_xlabel("training steps")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
