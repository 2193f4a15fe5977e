"""Minimal deterministic SVG line charts."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f")
W, H = 640, 400
ML, MR, MT, MB = 70, 150, 40, 50


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_chart(series, title="", xlabel="", ylabel="", logx=False) -> str:
    """``series`` is a list of ``(label, xs, ys)``; non-finite points are skipped."""
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
           if math.isfinite(x) and math.isfinite(y) and (x > 0 or not logx)]
    if not pts:
        pts = [(1.0, 0.0)]
    tx = (lambda x: math.log10(x)) if logx else (lambda x: x)
    xs = [tx(p[0]) for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = W - ML - MR, H - MT - MB

    def px(x):
        return ML + (tx(x) - x0) / (x1 - x0) * pw

    def py(y):
        return MT + (y1 - y) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W // 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        X = ML + (t - x0) / (x1 - x0) * pw
        label = f"{10 ** t:.3g}" if logx else f"{t:.3g}"
        out.append(f'<line x1="{_fmt(X)}" y1="{MT + ph}" x2="{_fmt(X)}" y2="{MT + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(X)}" y="{MT + ph + 16}" text-anchor="middle">{label}</text>')
    for t in _ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{ML - 4}" y1="{_fmt(Y)}" x2="{ML}" y2="{_fmt(Y)}" stroke="black"/>')
        out.append(f'<text x="{ML - 6}" y="{_fmt(Y + 4)}" text-anchor="end">{t:.3g}</text>')
    if y0 < 0 < y1:
        out.append(f'<line x1="{ML}" y1="{_fmt(py(0))}" x2="{ML + pw}" y2="{_fmt(py(0))}" '
                   'stroke="#bbbbbb" stroke-dasharray="4,3"/>')
    out.append(f'<text x="{ML + pw // 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MT + ph // 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MT + ph // 2})">{escape(ylabel)}</text>')
    for i, (label, sx, sy) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        coords = [f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(sx, sy)
                  if math.isfinite(x) and math.isfinite(y) and (x > 0 or not logx)]
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                       f'points="{" ".join(coords)}"/>')
        ly = MT + 14 + 16 * i
        out.append(f'<line x1="{ML + pw + 10}" y1="{ly}" x2="{ML + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ML + pw + 34}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
