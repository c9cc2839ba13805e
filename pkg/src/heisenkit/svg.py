"""Standalone SVG line plots (no plotting backend required)."""
from __future__ import annotations

from html import escape
from pathlib import Path

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _ticks(lo, hi, log):
    if log:
        e0, e1 = int(np.floor(lo)), int(np.ceil(hi))
        vals = list(range(e0, e1 + 1))
        step = max(1, len(vals) // 6)
        return [(v, f"1e{v}") for v in vals[::step] if lo <= v <= hi]
    vals = np.linspace(lo, hi, 5)
    return [(v, f"{v:.3g}") for v in vals]


def line_plot(path, series, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False, width: int = 640, height: int = 420) -> Path:
    """``series`` is a list of ``(x, y, label)``; nonpositive values are dropped on log axes."""
    W, H, L, R, T, B = width, height, 70, 20, 40, 50
    clean = []
    for x, y, lab in series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        keep = np.isfinite(x) & np.isfinite(y)
        if logx:
            keep &= x > 0
        if logy:
            keep &= y > 0
        x, y = x[keep], y[keep]
        clean.append((np.log10(x) if logx else x, np.log10(y) if logy else y, lab))
    allx = np.concatenate([c[0] for c in clean]) if clean else np.array([0.0, 1.0])
    ally = np.concatenate([c[1] for c in clean]) if clean else np.array([0.0, 1.0])
    if allx.size == 0:
        allx, ally = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = allx.min(), allx.max()
    y0, y1 = ally.min(), ally.max()
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(v):
        return L + (v - x0) / (x1 - x0) * (W - L - R)

    def py(v):
        return H - B - (v - y0) / (y1 - y0) * (H - T - B)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
           f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>']
    for v, lab in _ticks(x0, x1, logx):
        out.append(f'<text x="{px(v):.1f}" y="{H - B + 16}" text-anchor="middle" font-size="11">{lab}</text>')
    for v, lab in _ticks(y0, y1, logy):
        out.append(f'<text x="{L - 6}" y="{py(v) + 4:.1f}" text-anchor="end" font-size="11">{lab}</text>')
    out.append(f'<text x="{W / 2:.1f}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{H / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {H / 2:.1f})">{escape(ylabel)}</text>')
    for k, (x, y, lab) in enumerate(clean):
        col = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.8" points="{pts}"/>')
        out.append(f'<text x="{W - R - 4}" y="{T + 14 * (k + 1)}" text-anchor="end" font-size="11" '
                   f'fill="{col}">{escape(lab)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path
