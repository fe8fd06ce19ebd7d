"""Dependency-free SVG scatter of predicted vs actual values with the identity line."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .evaluate import ScatterData

SIZE = 640
MARGIN = 70  # room for tick labels and axis titles
PAD = 0.05


def axis_range(values: np.ndarray) -> tuple[float, float]:
    """Data range padded by 5% on each side; a zero-width range is widened to +-1."""
    lo = float(np.min(values))
    hi = float(np.max(values))
    span = hi - lo
    if span == 0.0:
        return lo - 1.0, hi + 1.0
    return lo - PAD * span, hi + PAD * span


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(data: ScatterData, units: str = "µg/m³") -> str:
    """Both axes share one range so the identity line is the diagonal."""
    lo, hi = axis_range(np.concatenate([data.actual, data.predicted]))
    inner = SIZE - 2 * MARGIN

    def sx(v):
        return MARGIN + (v - lo) / (hi - lo) * inner

    def sy(v):
        return SIZE - MARGIN - (v - lo) / (hi - lo) * inner

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
        f'<text x="{SIZE / 2}" y="30" text-anchor="middle" font-size="18" '
        f'font-family="sans-serif">{escape(data.label)}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" '
        f'stroke="black" stroke-width="1"/>',
    ]
    for t in np.linspace(lo, hi, 6):
        x, y = sx(t), sy(t)
        label = f"{t:.4g}"
        out.append(f'<line x1="{_fmt(x)}" y1="{SIZE - MARGIN}" x2="{_fmt(x)}" '
                   f'y2="{SIZE - MARGIN + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{SIZE - MARGIN + 20}" text-anchor="middle" '
                   f'font-size="12" font-family="sans-serif">{label}</text>')
        out.append(f'<line x1="{MARGIN - 5}" y1="{_fmt(y)}" x2="{MARGIN}" y2="{_fmt(y)}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{MARGIN - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
                   f'font-size="12" font-family="sans-serif">{label}</text>')
    out.append(f'<text x="{SIZE / 2}" y="{SIZE - 20}" text-anchor="middle" font-size="14" '
               f'font-family="sans-serif">actual ({escape(units)})</text>')
    out.append(f'<text x="20" y="{SIZE / 2}" text-anchor="middle" font-size="14" '
               f'font-family="sans-serif" transform="rotate(-90 20 {SIZE / 2})">'
               f'predicted ({escape(units)})</text>')
    for a, p in zip(data.actual, data.predicted):
        out.append(f'<circle cx="{_fmt(sx(a))}" cy="{_fmt(sy(p))}" r="2.5" fill="steelblue" '
                   f'fill-opacity="0.6"/>')
    (x0, y0), (x1, y1) = data.identity
    out.append(f'<line class="identity" x1="{_fmt(sx(x0))}" y1="{_fmt(sy(y0))}" '
               f'x2="{_fmt(sx(x1))}" y2="{_fmt(sy(y1))}" stroke="firebrick" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_scatter_csv(data: ScatterData, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["actual", "predicted"])
        for a, p in zip(data.actual, data.predicted):
            w.writerow([repr(float(a)), repr(float(p))])


def read_scatter_csv(path: str | Path, label: str = "") -> ScatterData:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    a = np.array([float(r[0]) for r in rows])
    p = np.array([float(r[1]) for r in rows])
    lo = float(min(a.min(), p.min()))
    hi = float(max(a.max(), p.max()))
    return ScatterData(label, a, p, ((lo, lo), (hi, hi)))
