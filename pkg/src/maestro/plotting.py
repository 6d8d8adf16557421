"""Minimal deterministic SVG charts (line and bar).

The root ``<svg>`` element carries ``data-xmin``/``data-xmax``/``data-ymin``/
``data-ymax`` with the plotted axis ranges, and every series is one
``<path class="series" data-label=...>`` so the output can be checked
structurally.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import quoteattr

WIDTH, HEIGHT = 640, 400
MARGIN = 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _range(values, pad_zero: bool = False) -> tuple[float, float]:
    vals = [v for v in values if v is not None and math.isfinite(v)]
    lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    if pad_zero:
        lo, hi = min(lo, 0.0), max(hi, 0.0)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _frame(title, xlabel, ylabel, xr, yr) -> list[str]:
    w, h, m = WIDTH, HEIGHT, MARGIN
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" '
        f'data-xmin="{_fmt(xr[0])}" data-xmax="{_fmt(xr[1])}" data-ymin="{_fmt(yr[0])}" data-ymax="{_fmt(yr[1])}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<text x="{w / 2}" y="24" text-anchor="middle" font-size="16">{_esc(title)}</text>',
        f'<line class="axis" x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>',
        f'<line class="axis" x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>',
        f'<text x="{w / 2}" y="{h - 15}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="15" y="{h / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {h / 2})">{_esc(ylabel)}</text>',
        f'<text x="{m}" y="{h - m + 16}" font-size="10" text-anchor="middle">{_fmt(xr[0])}</text>',
        f'<text x="{w - m}" y="{h - m + 16}" font-size="10" text-anchor="middle">{_fmt(xr[1])}</text>',
        f'<text x="{m - 4}" y="{h - m}" font-size="10" text-anchor="end">{_fmt(yr[0])}</text>',
        f'<text x="{m - 4}" y="{m + 4}" font-size="10" text-anchor="end">{_fmt(yr[1])}</text>',
    ]
    return out


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _sx(x, xr):
    return MARGIN + (x - xr[0]) / (xr[1] - xr[0]) * (WIDTH - 2 * MARGIN)


def _sy(y, yr):
    return HEIGHT - MARGIN - (y - yr[0]) / (yr[1] - yr[0]) * (HEIGHT - 2 * MARGIN)


def line_chart(series: dict[str, tuple[list[float], list[float]]], title: str, xlabel: str, ylabel: str) -> str:
    xs = [x for px, _ in series.values() for x in px]
    ys = [y for _, py in series.values() for y in py]
    xr, yr = _range(xs), _range(ys)
    out = _frame(title, xlabel, ylabel, xr, yr)
    for k, (label, (px, py)) in enumerate(series.items()):
        pts = [(x, y) for x, y in zip(px, py) if y is not None and math.isfinite(y)]
        d = " ".join(f"{'M' if i == 0 else 'L'}{_sx(x, xr):.2f},{_sy(y, yr):.2f}" for i, (x, y) in enumerate(pts))
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<path class="series" data-label={quoteattr(label)} d="{d}" fill="none" stroke="{color}" stroke-width="2"/>')
        out.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 14 * k}" font-size="10" fill="{color}">{_esc(label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(values: dict[str, float], title: str, ylabel: str) -> str:
    """One bar per label; each bar is a closed ``path`` so it counts as a series."""
    yr = _range(list(values.values()), pad_zero=True)
    xr = (0.0, float(max(len(values), 1)))
    out = _frame(title, "", ylabel, xr, yr)
    width = (WIDTH - 2 * MARGIN) / max(len(values), 1)
    base = _sy(0.0, yr)
    for k, (label, v) in enumerate(values.items()):
        x0 = MARGIN + k * width + width * 0.15
        x1 = x0 + width * 0.7
        top = _sy(v, yr)
        color = PALETTE[k % len(PALETTE)]
        d = f"M{x0:.2f},{base:.2f} L{x0:.2f},{top:.2f} L{x1:.2f},{top:.2f} L{x1:.2f},{base:.2f} Z"
        out.append(f'<path class="series" data-label={quoteattr(label)} data-value="{_fmt(v)}" d="{d}" fill="{color}"/>')
        out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - MARGIN + 28}" font-size="10" text-anchor="middle">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
