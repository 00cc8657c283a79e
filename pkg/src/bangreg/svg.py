"""Self-contained log-log SVG plots (no external references, deterministic output)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 480
MARGIN = dict(left=80, right=20, top=40, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _num(v: float) -> str:
    return f"{v:.3f}"


def _decades(lo: float, hi: float) -> list:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def loglog_svg(series, lines=(), *, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Scatter series and straight lines on log-log axes.

    ``series`` is a list of ``(label, xs, ys)`` with positive values;
    ``lines`` a list of ``(label, slope, coefficient)`` drawn as
    ``y = coefficient * x^slope`` over the data range.
    """
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
           if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]
    if not pts:
        raise ValueError("nothing to plot: no positive finite points")
    xlo, xhi = min(p[0] for p in pts), max(p[0] for p in pts)
    ylo, yhi = min(p[1] for p in pts), max(p[1] for p in pts)
    for _, slope, coef in lines:
        for x in (xlo, xhi):
            y = coef * x**slope
            if y > 0:
                ylo, yhi = min(ylo, y), max(yhi, y)
    X0, X1 = _decades(xlo, xhi)[0], _decades(xlo, xhi)[-1]
    Y0, Y1 = _decades(ylo, yhi)[0], _decades(ylo, yhi)[-1]
    X1, Y1 = max(X1, X0 + 1), max(Y1, Y0 + 1)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + pw * (math.log10(x) - X0) / (X1 - X0)

    def sy(y):
        return MARGIN["top"] + ph * (1 - (math.log10(y) - Y0) / (Y1 - Y0))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for d in range(X0, X1 + 1):
        x = _num(sx(10.0**d))
        out.append(f'<line x1="{x}" y1="{MARGIN["top"]}" x2="{x}" y2="{MARGIN["top"] + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{x}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">1e{d}</text>')
    for d in range(Y0, Y1 + 1):
        y = _num(sy(10.0**d))
        out.append(f'<line x1="{MARGIN["left"]}" y1="{y}" x2="{MARGIN["left"] + pw}" y2="{y}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{y}" text-anchor="end" dominant-baseline="middle">1e{d}</text>')
    legend = []
    for k, (label, xs, ys) in enumerate(series):
        color = COLORS[k % len(COLORS)]
        for x, y in zip(xs, ys):
            if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y):
                out.append(f'<circle cx="{_num(sx(x))}" cy="{_num(sy(y))}" r="3" fill="{color}"/>')
        legend.append((label, color, False))
    for k, (label, slope, coef) in enumerate(lines):
        color = COLORS[(len(series) + k) % len(COLORS)]
        a, b = xlo, xhi
        out.append(
            f'<line x1="{_num(sx(a))}" y1="{_num(sy(coef * a**slope))}" x2="{_num(sx(b))}" '
            f'y2="{_num(sy(coef * b**slope))}" stroke="{color}" stroke-dasharray="6,3"/>'
        )
        legend.append((label, color, True))
    for k, (label, color, dashed) in enumerate(legend):
        y = MARGIN["top"] + 16 + 16 * k
        x = MARGIN["left"] + 10
        if dashed:
            out.append(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" stroke-dasharray="6,3"/>')
        else:
            out.append(f'<circle cx="{x + 10}" cy="{y}" r="3" fill="{color}"/>')
        out.append(f'<text x="{x + 26}" y="{y}" dominant-baseline="middle">{escape(label)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="18" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2})">{escape(ylabel)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
