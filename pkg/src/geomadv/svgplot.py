"""Minimal hand-written SVG emitters for experiment figures.

Line plots, histograms and label heatmaps, written as plain strings with no
plotting dependency.  Plots only draw data they are given; every headline
number lives in the CSV reports.
"""

from __future__ import annotations

import math

import numpy as np

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * max(abs(hi), 1.0):
        out.append(round(t, 12))
        t += step
    return out or [lo, hi]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class _Canvas:
    def __init__(self, width, height, margin=55):
        self.width, self.height, self.margin = width, height, margin
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def map_x(self, x, lo, hi):
        span = (hi - lo) or 1.0
        return self.margin + (x - lo) / span * (self.width - 2 * self.margin)

    def map_y(self, y, lo, hi):
        span = (hi - lo) or 1.0
        return self.height - self.margin - (y - lo) / span * (self.height - 2 * self.margin)

    def text(self, x, y, s, size=11, anchor="middle", rotate=None):
        rot = f' transform="rotate(-90 {x} {y})"' if rotate else ""
        self.parts.append(
            f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" font-family="sans-serif" '
            f'text-anchor="{anchor}"{rot}>{s}</text>'
        )

    def line(self, x1, y1, x2, y2, color="#888", width=1, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
            f'stroke="{color}" stroke-width="{width}"{d}/>'
        )

    def polyline(self, pts, color, width=1.6):
        coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="{width}"/>'
        )

    def rect(self, x, y, w, h, color, opacity=1.0):
        self.parts.append(
            f'<rect x="{x:.1f}" y="{y:.1f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="{color}" fill-opacity="{opacity:.3f}"/>'
        )

    def axes(self, x_lo, x_hi, y_lo, y_hi, xlabel, ylabel, title):
        m = self.margin
        self.line(m, self.height - m, self.width - m, self.height - m, "#000")
        self.line(m, m, m, self.height - m, "#000")
        for t in _ticks(x_lo, x_hi):
            px = self.map_x(t, x_lo, x_hi)
            self.line(px, self.height - m, px, self.height - m + 4, "#000")
            self.text(px, self.height - m + 16, _fmt(t), size=9)
        for t in _ticks(y_lo, y_hi):
            py = self.map_y(t, y_lo, y_hi)
            self.line(m - 4, py, m, py, "#000")
            self.text(m - 7, py + 3, _fmt(t), size=9, anchor="end")
        self.text(self.width / 2, self.height - 12, xlabel)
        self.text(15, self.height / 2, ylabel, rotate=True)
        self.text(self.width / 2, 18, title, size=13)

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_plot(
    xs,
    series: dict[str, list[float]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    y_range: tuple[float, float] | None = None,
    width: int = 560,
    height: int = 400,
) -> str:
    """Multi-series line plot; series maps legend label to y values over xs."""
    xs = [float(x) for x in xs]
    ys_all = [v for vals in series.values() for v in vals if v is not None and np.isfinite(v)]
    if y_range is None:
        y_lo, y_hi = (min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0)
        pad = 0.05 * ((y_hi - y_lo) or 1.0)
        y_lo, y_hi = y_lo - pad, y_hi + pad
    else:
        y_lo, y_hi = y_range
    c = _Canvas(width, height)
    c.axes(min(xs), max(xs), y_lo, y_hi, xlabel, ylabel, title)
    for i, (label, ys) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = [
            (c.map_x(x, min(xs), max(xs)), c.map_y(y, y_lo, y_hi))
            for x, y in zip(xs, ys)
            if y is not None and np.isfinite(y)
        ]
        if pts:
            c.polyline(pts, color)
        c.rect(width - c.margin - 130, 30 + 16 * i, 12, 4, color)
        c.text(width - c.margin - 112, 36 + 16 * i, label, size=10, anchor="start")
    return c.render()


def histogram_plot(
    bin_edges,
    fractions,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "fraction",
    width: int = 560,
    height: int = 400,
) -> str:
    """Bar chart from precomputed bin fractions."""
    edges = [float(e) for e in bin_edges]
    fr = [float(f) for f in fractions]
    y_hi = max(fr + [1e-9]) * 1.1
    c = _Canvas(width, height)
    c.axes(edges[0], edges[-1], 0.0, y_hi, xlabel, ylabel, title)
    for lo, hi, f in zip(edges[:-1], edges[1:], fr):
        x0 = c.map_x(lo, edges[0], edges[-1])
        x1 = c.map_x(hi, edges[0], edges[-1])
        y0 = c.map_y(f, 0.0, y_hi)
        c.rect(x0 + 0.5, y0, x1 - x0 - 1.0, c.map_y(0.0, 0.0, y_hi) - y0, PALETTE[0], 0.85)
    return c.render()


def heatmap_plot(
    grid,
    extent,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 480,
    height: int = 440,
) -> str:
    """Grayscale-to-color raster of a value grid over extent=(x0,x1,y0,y1).

    grid[i][j] is the value at row i (y) and column j (x); values are
    normalized over the finite range.
    """
    g = np.asarray(grid, dtype=np.float64)
    x0, x1, y0, y1 = extent
    finite = g[np.isfinite(g)]
    lo = float(finite.min()) if len(finite) else 0.0
    hi = float(finite.max()) if len(finite) else 1.0
    span = (hi - lo) or 1.0
    c = _Canvas(width, height)
    c.axes(x0, x1, y0, y1, xlabel, ylabel, title)
    rows, cols = g.shape
    px0, px1 = c.map_x(x0, x0, x1), c.map_x(x1, x0, x1)
    py0, py1 = c.map_y(y0, y0, y1), c.map_y(y1, y0, y1)
    cw = (px1 - px0) / cols
    ch = (py0 - py1) / rows
    for i in range(rows):
        for j in range(cols):
            v = (g[i, j] - lo) / span if np.isfinite(g[i, j]) else 0.0
            r = int(255 * v)
            b = int(255 * (1 - v))
            c.rect(px0 + j * cw, py0 - (i + 1) * ch, cw + 0.3, ch + 0.3, f"rgb({r},60,{b})")
    return c.render()
