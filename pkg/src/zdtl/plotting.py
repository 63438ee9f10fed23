"""Matplotlib defaults and byte-stable SVG export."""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle, Polygon  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 6.0),
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.linewidth": 0.8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "svg.fonttype": "none",
    "svg.hashsalt": "zdtl",
    "path.simplify": False,
}

CELL_FILL = "#dfe8f2"
CELL_EDGE = "#2b4a6f"
ACCENT = "#b5382f"


def svg_bytes(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def new_figure(size=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=size or STYLE["figure.figsize"])
    return fig, ax


def draw_cells(polygons, labels, viewport, balls=(), origin=True, stroke: float = 0.8) -> bytes:
    """Cell polygons with their labels, the origin and circles of the given radii about it."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for poly, lab in zip(polygons, labels):
            ax.add_patch(Polygon(poly, closed=True, facecolor=CELL_FILL, edgecolor=CELL_EDGE,
                                 linewidth=stroke))
            c = np.asarray(lab, dtype=float)
            if viewport[0] <= c[0] <= viewport[1] and viewport[2] <= c[1] <= viewport[3]:
                ax.plot(c[0], c[1], ".", color=CELL_EDGE, markersize=2)
                ax.annotate(f"{lab[0]},{lab[1]}", c, fontsize=6, ha="center", va="bottom")
        for r in balls:
            ax.add_patch(Circle((0.0, 0.0), r, fill=False, edgecolor=ACCENT, linestyle="--",
                                linewidth=stroke))
        if origin:
            ax.plot(0.0, 0.0, "+", color=ACCENT, markersize=8)
        ax.set_xlim(viewport[0], viewport[1])
        ax.set_ylim(viewport[2], viewport[3])
        ax.set_aspect("equal")
        ax.set_xlabel("$a_1$")
        ax.set_ylabel("$a_2$")
        return svg_bytes(fig)


def draw_histogram(values, threshold=None, xlabel="", title="") -> bytes:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 3.5))
        vals = np.asarray(values, dtype=float)
        vals = vals[np.isfinite(vals)]
        ax.hist(vals, bins=40, color=CELL_FILL, edgecolor=CELL_EDGE, linewidth=0.6)
        if threshold is not None:
            ax.axvline(threshold, color=ACCENT, linestyle="--")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("count")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return svg_bytes(fig)


def draw_series(x, ys: dict, xlabel="", ylabel="", hline=None, logx=False) -> bytes:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 3.5))
        for name in sorted(ys):
            ax.plot(x, ys[name], marker="o", markersize=3, label=name)
        if hline is not None:
            ax.axhline(hline, color=ACCENT, linestyle="--")
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if len(ys) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        return svg_bytes(fig)
