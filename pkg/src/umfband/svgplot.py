"""Minimal self-contained SVG line plots (no plotting dependency)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["line_plot_svg"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f"]


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min(s for s in (1 * mag, 2 * mag, 5 * mag, 10 * mag) if s >= raw)
    first = np.ceil(lo / step) * step
    return np.arange(first, hi + step / 2, step)


def line_plot_svg(path: str | Path, xs: np.ndarray, series: list[tuple[str, np.ndarray]],
                  x_label: str = "", y_label: str = "", title: str = "",
                  width: int = 720, height: int = 480) -> None:
    """Write one SVG with a line per (label, y-values) pair over shared x."""
    xs = np.asarray(xs, dtype=float)
    margin_l, margin_r, margin_t, margin_b = 64, 140, 36, 48
    pw = width - margin_l - margin_r
    ph = height - margin_t - margin_b
    x_lo, x_hi = float(xs.min()), float(xs.max())
    ys_all = np.concatenate([np.asarray(y, dtype=float) for _, y in series])
    y_lo, y_hi = float(ys_all.min()), float(ys_all.max())
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x: float) -> float:
        return margin_l + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y: float) -> float:
        return margin_t + (y_hi - y) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin_l}" y="{margin_t}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#333"/>',
    ]
    for tx in _ticks(x_lo, x_hi):
        parts.append(f'<line x1="{px(tx):.1f}" y1="{margin_t + ph}" x2="{px(tx):.1f}" '
                     f'y2="{margin_t + ph + 5}" stroke="#333"/>')
        parts.append(f'<text x="{px(tx):.1f}" y="{margin_t + ph + 18}" '
                     f'text-anchor="middle">{tx:g}</text>')
    for ty in _ticks(y_lo, y_hi):
        parts.append(f'<line x1="{margin_l - 5}" y1="{py(ty):.1f}" x2="{margin_l}" '
                     f'y2="{py(ty):.1f}" stroke="#333"/>')
        parts.append(f'<text x="{margin_l - 8}" y="{py(ty):.1f}" dy="4" '
                     f'text-anchor="end">{ty:g}</text>')
    for i, (label, y) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(float(a)):.2f},{py(float(b)):.2f}" for a, b in zip(xs, y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
        ly = margin_t + 14 + 16 * i
        parts.append(f'<line x1="{width - margin_r + 8}" y1="{ly - 4}" '
                     f'x2="{width - margin_r + 28}" y2="{ly - 4}" stroke="{color}" '
                     'stroke-width="2"/>')
        parts.append(f'<text x="{width - margin_r + 32}" y="{ly}">{label}</text>')
    if title:
        parts.append(f'<text x="{margin_l + pw / 2}" y="20" text-anchor="middle" '
                     f'font-size="14">{title}</text>')
    if x_label:
        parts.append(f'<text x="{margin_l + pw / 2}" y="{height - 10}" '
                     f'text-anchor="middle">{x_label}</text>')
    if y_label:
        parts.append(f'<text x="16" y="{margin_t + ph / 2}" text-anchor="middle" '
                     f'transform="rotate(-90 16 {margin_t + ph / 2})">{y_label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
