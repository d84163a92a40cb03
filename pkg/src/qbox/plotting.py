"""Deterministic matplotlib line charts written straight to SVG."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "svg.hashsalt": "qbox",
    "svg.fonttype": "none",
    "figure.figsize": (7.0, 4.2),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}


def line_chart(path, x, series: dict, xlabel: str, ylabel: str, title: str = "",
               panels: list[tuple[dict, str]] | None = None) -> None:
    """One polyline per entry of ``series``; ``panels`` adds stacked extra axes.

    Output is byte-stable for identical input: the SVG id salt is fixed and
    the creation date is omitted from the metadata.
    """
    groups = [(series, ylabel)] + list(panels or [])
    with plt.rc_context(RC):
        fig, axes = plt.subplots(len(groups), 1, sharex=True, squeeze=False,
                                 figsize=(7.0, 2.6 * len(groups) + 0.6))
        for ax, (lines, label) in zip(axes[:, 0], groups):
            for name, y in lines.items():
                ax.plot(x, y, label=name)
            ax.set_ylabel(label)
            if len(lines) > 1:
                ax.legend(loc="best", frameon=False)
        axes[-1, 0].set_xlabel(xlabel)
        if title:
            axes[0, 0].set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "qbox"})
        plt.close(fig)
