"""Small self-contained SVG writers (heat maps and line plots) with deterministic output."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

_W, _H, _PAD = 640, 400, 48


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{_escape(title)}</text>',
    ]


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _colour(t: float) -> str:
    # Diverging blue-white-red map for t in [-1, 1]; grey for masked cells.
    if not math.isfinite(t):
        return "#bbbbbb"
    t = max(-1.0, min(1.0, t))
    if t >= 0:
        r, g, b = 255, int(255 * (1 - t)), int(255 * (1 - t))
    else:
        r, g, b = int(255 * (1 + t)), int(255 * (1 + t)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(values: np.ndarray, x_label: str = "p", y_label: str = "theta", title: str = "") -> str:
    """Rows of ``values`` drawn bottom to top, columns left to right; NaN cells grey."""
    values = np.asarray(values, dtype=float)
    ny, nx = values.shape
    finite = values[np.isfinite(values)]
    scale = float(np.max(np.abs(finite))) if finite.size else 1.0
    scale = scale if scale > 0 else 1.0
    cw = (_W - 2 * _PAD) / nx
    ch = (_H - 2 * _PAD) / ny
    out = _header(title)
    for i in range(ny):
        for j in range(nx):
            x = _PAD + j * cw
            y = _H - _PAD - (i + 1) * ch
            out.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cw)}" height="{_fmt(ch)}" '
                       f'fill="{_colour(values[i, j] / scale)}"/>')
    out.append(f'<text x="{_W / 2:.0f}" y="{_H - 12}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">{_escape(x_label)}</text>')
    out.append(f'<text x="14" y="{_H / 2:.0f}" font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 14 {_H / 2:.0f})">{_escape(y_label)}</text>')
    out.append(f'<text x="{_W - _PAD}" y="{_H - 12}" text-anchor="end" font-family="sans-serif" '
               f'font-size="10">max |v| = {scale:.3e}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def polylines(series: Sequence[tuple[str, Sequence[float], Sequence[float]]], title: str = "",
              log_y: bool = False, x_label: str = "", y_label: str = "") -> str:
    """One polyline per ``(label, xs, ys)``; ``log_y`` plots ``log10 |y|``."""
    prepared = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if log_y:
            ys = np.log10(np.maximum(np.abs(ys), 1e-300))
        ok = np.isfinite(xs) & np.isfinite(ys)
        prepared.append((label, xs[ok], ys[ok]))
    allx = np.concatenate([p[1] for p in prepared]) if prepared else np.zeros(1)
    ally = np.concatenate([p[2] for p in prepared]) if prepared else np.zeros(1)
    if allx.size == 0:
        allx, ally = np.zeros(1), np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    sx = (_W - 2 * _PAD) / (x1 - x0)
    sy = (_H - 2 * _PAD) / (y1 - y0)
    out = _header(title)
    out.append(f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" '
               'fill="none" stroke="#444444"/>')
    for idx, (label, xs, ys) in enumerate(prepared):
        colour = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(f"{_fmt(_PAD + (x - x0) * sx)},{_fmt(_H - _PAD - (y - y0) * sy)}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{_W - _PAD - 4}" y="{_PAD + 14 + 14 * idx}" text-anchor="end" fill="{colour}" '
                   f'font-family="sans-serif" font-size="11">{_escape(label)}</text>')
    ylab = f"log10 |{y_label}|" if log_y and y_label else y_label
    out.append(f'<text x="{_W / 2:.0f}" y="{_H - 12}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">{_escape(x_label)} [{x0:.3g}, {x1:.3g}]</text>')
    out.append(f'<text x="14" y="{_H / 2:.0f}" font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 14 {_H / 2:.0f})">{_escape(ylab)} [{y0:.3g}, {y1:.3g}]</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
