"""Tiny SVG writer for line plots and heatmaps.  Output is deterministic text."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

_W, _H, _PAD = 480, 320, 40
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="16" text-anchor="middle" font-size="12" font-family="sans-serif">{title}</text>',
    ]


def line_plot(x: Sequence[float], series: Mapping[str, Sequence[float]], title: str = "") -> str:
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] or [np.zeros(1)])
    lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    if hi == lo:
        hi = lo + 1.0
    xlo, xhi = x.min(), x.max()
    if xhi == xlo:
        xhi = xlo + 1.0

    def px(v):
        return _PAD + (v - xlo) / (xhi - xlo) * (_W - 2 * _PAD)

    def py(v):
        return _H - _PAD - (v - lo) / (hi - lo) * (_H - 2 * _PAD)

    out = _header(title)
    out.append(
        f'<rect x="{_PAD}" y="{_PAD}" width="{_W - 2 * _PAD}" height="{_H - 2 * _PAD}" fill="none" stroke="black"/>'
    )
    for i, (name, y) in enumerate(ys.items()):
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, y) if np.isfinite(b))
        color = _COLORS[i % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        out.append(
            f'<text x="{_W - _PAD - 4}" y="{_PAD + 14 * (i + 1)}" text-anchor="end" font-size="10" '
            f'font-family="sans-serif" fill="{color}">{name}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(values, title: str = "") -> str:
    """Grey-scale image of |values| scaled to its maximum; row 0 at the top."""
    a = np.abs(np.asarray(values, dtype=float))
    top = a.max() if a.size and a.max() > 0 else 1.0
    nr, nc = a.shape
    cw = (_W - 2 * _PAD) / nc
    ch = (_H - 2 * _PAD) / nr
    out = _header(title)
    for i in range(nr):
        for j in range(nc):
            g = int(round(255 * (1 - a[i, j] / top)))
            out.append(
                f'<rect x="{_fmt(_PAD + j * cw)}" y="{_fmt(_PAD + i * ch)}" width="{_fmt(cw + 0.05)}" '
                f'height="{_fmt(ch + 0.05)}" fill="rgb({g},{g},{g})"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"
