"""Minimal line-plot SVG writer (axes, ticks, polylines, legend)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")
W, H = 640, 420
ML, MR, MT, MB = 70, 20, 40, 55


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag * 10)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def line_plot(path, series, title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    """``series`` is a list of ``(label, x, y)``; non-finite points split the polyline."""
    pts = [(lab, np.asarray(x, float), np.asarray(y, float)) for lab, x, y in series]
    finite = [np.isfinite(x) & np.isfinite(y) for _, x, y in pts]
    xs = np.concatenate([x[m] for (_, x, _), m in zip(pts, finite)] or [np.array([0.0, 1.0])])
    ys = np.concatenate([y[m] for (_, _, y), m in zip(pts, finite)] or [np.array([0.0, 1.0])])
    if xs.size == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = W - ML - MR, H - MT - MB

    def sx(v):
        return ML + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MT + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.1f}" y1="{MT + ph}" x2="{sx(t):.1f}" y2="{MT + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.1f}" y="{MT + ph + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{ML - 5}" y1="{sy(t):.1f}" x2="{ML}" y2="{sy(t):.1f}" stroke="black"/>')
        out.append(f'<text x="{ML - 8}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MT + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {MT + ph / 2})">{escape(ylabel)}</text>')
    for k, ((lab, x, y), m) in enumerate(zip(pts, finite)):
        color = _COLORS[k % len(_COLORS)]
        run: list = []
        for xi, yi, ok in zip(x, y, m):
            if ok:
                run.append(f"{sx(xi):.2f},{sy(yi):.2f}")
            elif run:
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(run)}"/>')
                run = []
        if run:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(run)}"/>')
        ly = MT + 14 + 14 * k
        out.append(f'<line x1="{ML + 10}" y1="{ly - 4}" x2="{ML + 30}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ML + 35}" y="{ly}">{escape(lab)}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
