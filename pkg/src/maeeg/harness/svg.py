"""Minimal SVG charts: line plots, bar charts and heatmaps as plain text."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _num(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _doc(body: list, width=WIDTH, height=HEIGHT, title: str = "") -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        head.append(f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _finite(values):
    return [v for v in values if v is not None and math.isfinite(v)]


def _range(values):
    vals = _finite(values)
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if lo == hi:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def _axes(xlabel: str, ylabel: str, ylo: float, yhi: float) -> list:
    x0, y0, x1, y1 = MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2, MARGIN
    out = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 15 {(y0 + y1) / 2})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        y = y0 - frac * (y0 - y1)
        out.append(f'<text x="{x0 - 5}" y="{_num(y + 4)}" text-anchor="end">{_num(ylo + frac * (yhi - ylo))}</text>')
    return out


def line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """``series`` maps a legend name to ``(xs, ys)``; non-finite points are skipped."""
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    xlo, xhi = _range(xs_all)
    ylo, yhi = _range(ys_all)
    x0, y0, x1, y1 = MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2, MARGIN

    def px(x):
        return x0 + (x - xlo) / (xhi - xlo) * (x1 - x0)

    def py(y):
        return y0 - (y - ylo) / (yhi - ylo) * (y0 - y1)

    body = _axes(xlabel, ylabel, ylo, yhi)
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = [f"{_num(px(x))},{_num(py(y))}" for x, y in zip(xs, ys)
               if y is not None and math.isfinite(y)]
        if pts:
            body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        body.append(f'<text x="{x1 - 5}" y="{y1 + 14 * (i + 1)}" text-anchor="end" fill="{color}">{escape(str(name))}</text>')
    return _doc(body, title=title)


def bar_chart(labels: list, values: list, title: str = "", ylabel: str = "") -> str:
    lo, hi = _range(list(values) + [0.0])
    lo = min(lo, 0.0)
    x0, y0, x1, y1 = MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2, MARGIN
    slot = (x1 - x0) / max(len(labels), 1)
    body = _axes("", ylabel, lo, hi)
    for i, (label, value) in enumerate(zip(labels, values)):
        cx = x0 + slot * (i + 0.5)
        if value is not None and math.isfinite(value):
            top = y0 - (value - lo) / (hi - lo) * (y0 - y1)
            body.append(f'<rect x="{_num(cx - slot * 0.35)}" y="{_num(top)}" width="{_num(slot * 0.7)}" '
                        f'height="{_num(y0 - top)}" fill="{PALETTE[i % len(PALETTE)]}"/>')
            body.append(f'<text x="{_num(cx)}" y="{_num(top - 4)}" text-anchor="middle">{_num(value)}</text>')
        body.append(f'<text x="{_num(cx)}" y="{y0 + 14}" text-anchor="middle">{escape(str(label))}</text>')
    return _doc(body, title=title)


def _color(value: float, lo: float, hi: float) -> str:
    if value is None or not math.isfinite(value):
        return "#cccccc"
    f = 0.0 if hi == lo else (value - lo) / (hi - lo)
    r = int(255 * (1 - f) + 8 * f)
    g = int(255 * (1 - f) + 48 * f)
    b = int(255 * (1 - f) + 107 * f)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(matrix, row_labels=None, col_labels=None, title: str = "", annotate: bool = True) -> str:
    """One ``<rect class="cell">`` per matrix entry, darker for larger values."""
    rows = [list(r) for r in matrix]
    n_rows, n_cols = len(rows), max((len(r) for r in rows), default=0)
    lo, hi = _range([v for r in rows for v in r])
    size = max(4.0, min(60.0, 480.0 / max(n_rows, n_cols, 1)))
    width = int(MARGIN * 2 + size * n_cols)
    height = int(MARGIN * 2 + size * n_rows)
    annotate = annotate and size >= 30
    body = []
    for i, row in enumerate(rows):
        for j, value in enumerate(row):
            x, y = MARGIN + j * size, MARGIN + i * size
            body.append(f'<rect class="cell" x="{_num(x)}" y="{_num(y)}" width="{_num(size)}" '
                        f'height="{_num(size)}" fill="{_color(value, lo, hi)}"/>')
            if annotate and value is not None and math.isfinite(value):
                body.append(f'<text x="{_num(x + size / 2)}" y="{_num(y + size / 2 + 4)}" '
                            f'text-anchor="middle">{_num(value)}</text>')
    for i, label in enumerate(row_labels or []):
        body.append(f'<text x="{MARGIN - 5}" y="{_num(MARGIN + (i + 0.5) * size + 4)}" '
                    f'text-anchor="end">{escape(str(label))}</text>')
    for j, label in enumerate(col_labels or []):
        body.append(f'<text x="{_num(MARGIN + (j + 0.5) * size)}" y="{MARGIN - 5}" '
                    f'text-anchor="middle">{escape(str(label))}</text>')
    return _doc(body, width, height, title)


def write_svg(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
