"""Small native SVG writers for line plots and the regime map.

Output is plain text with fixed number formatting, so identical data give
byte-identical files.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = 50
PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]
REGIME_COLOURS = {"finite": "#4c72b0", "infinite": "#dd8452", "indeterminate": "#cccccc", "error": "#222222"}


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _scale(values: np.ndarray, lo: float, hi: float, out_lo: float, out_hi: float) -> np.ndarray:
    span = hi - lo if hi > lo else 1.0
    return out_lo + (values - lo) / span * (out_hi - out_lo)


def line_plot(
    path: str | Path,
    series: Sequence[tuple[Sequence[float], Sequence[float], str]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logy: bool = False,
) -> Path:
    """Write ``[(x, y, label), ...]`` as polylines sharing one pair of axes."""
    prepared = []
    for x, y, label in series:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if logy:
            y = np.log10(np.where(y > 0, y, np.nan))
        ok = np.isfinite(x) & np.isfinite(y)
        prepared.append((x[ok], y[ok], label))
    xs = np.concatenate([p[0] for p in prepared]) if prepared else np.zeros(1)
    ys = np.concatenate([p[1] for p in prepared]) if prepared else np.zeros(1)
    if xs.size == 0:
        xs, ys = np.zeros(1), np.zeros(1)
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="12" y="{HEIGHT // 2}" font-size="12" transform="rotate(-90 12 {HEIGHT // 2})">'
        f"{escape(ylabel + (' (log10)' if logy else ''))}</text>",
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 15}" font-size="10">{x_lo:.3g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 15}" font-size="10" text-anchor="end">{x_hi:.3g}</text>',
        f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" font-size="10" text-anchor="end">{y_lo:.3g}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" font-size="10" text-anchor="end">{y_hi:.3g}</text>',
    ]
    for k, (x, y, label) in enumerate(prepared):
        colour = PALETTE[k % len(PALETTE)]
        px = _scale(x, x_lo, x_hi, MARGIN, WIDTH - MARGIN)
        py = _scale(y, y_lo, y_hi, HEIGHT - MARGIN, MARGIN)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1" points="{pts}"/>')
        if label:
            parts.append(
                f'<text x="{WIDTH - MARGIN + 2}" y="{MARGIN + 14 * k}" font-size="10" fill="{colour}">{escape(label)}</text>'
            )
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    return path


def regime_map(path: str | Path, ms: Sequence[float], ss: Sequence[float], labels: dict) -> Path:
    """Grid of coloured cells, ``m`` across and ``s`` down; ``labels[(m, s)]`` is the regime."""
    cw, ch = 70, 40
    width = MARGIN + cw * len(ms) + 20
    height = MARGIN + ch * len(ss) + 60
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for i, m in enumerate(ms):
        parts.append(f'<text x="{MARGIN + cw * i + cw // 2}" y="{MARGIN - 8}" text-anchor="middle" font-size="11">m={m:g}</text>')
    for j, s in enumerate(ss):
        parts.append(f'<text x="{MARGIN - 4}" y="{MARGIN + ch * j + ch // 2 + 4}" text-anchor="end" font-size="11">s={s:g}</text>')
        for i, m in enumerate(ms):
            label = labels.get((m, s), "error")
            colour = REGIME_COLOURS.get(label, "#222222")
            x, y = MARGIN + cw * i, MARGIN + ch * j
            parts.append(f'<rect x="{x}" y="{y}" width="{cw - 2}" height="{ch - 2}" fill="{colour}"/>')
            parts.append(f'<text x="{x + cw // 2}" y="{y + ch // 2 + 4}" text-anchor="middle" font-size="9">{escape(label)}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    return path
