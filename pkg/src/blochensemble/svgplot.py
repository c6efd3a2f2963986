"""Minimal self-contained SVG line charts (no plotting toolkit required)."""

from __future__ import annotations

import numpy as np

_PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]

_MAX_POINTS = 1500


def _decimate(x: np.ndarray, y: np.ndarray):
    if x.size <= _MAX_POINTS:
        return x, y
    idx = np.linspace(0, x.size - 1, _MAX_POINTS).astype(int)
    return x[idx], y[idx]


def _panel(lines, title, x0, y0, w, h):
    xs_all = np.concatenate([ln[0] for ln in lines])
    ys_all = np.concatenate([ln[1] for ln in lines])
    xmin, xmax = float(xs_all.min()), float(xs_all.max())
    ymin, ymax = float(ys_all.min()), float(ys_all.max())
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad

    def sx(v):
        return x0 + (v - xmin) / (xmax - xmin) * w

    def sy(v):
        return y0 + h - (v - ymin) / (ymax - ymin) * h

    parts = [
        f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#333"/>',
        f'<text x="{x0 + 4}" y="{y0 - 6}" font-size="13" fill="#000">{title}</text>',
        f'<text x="{x0 - 6}" y="{sy(ymin):.1f}" font-size="10" fill="#555" text-anchor="end">{ymin:.3g}</text>',
        f'<text x="{x0 - 6}" y="{sy(ymax):.1f}" font-size="10" fill="#555" text-anchor="end">{ymax:.3g}</text>',
        f'<text x="{x0:.1f}" y="{y0 + h + 14}" font-size="10" fill="#555">{xmin:.3g}</text>',
        f'<text x="{x0 + w:.1f}" y="{y0 + h + 14}" font-size="10" fill="#555" text-anchor="end">{xmax:.3g}</text>',
    ]
    for i, (x, y) in enumerate(lines):
        x, y = _decimate(np.asarray(x, float), np.asarray(y, float))
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>'
        )
    return "\n".join(parts)


def render_panels(panels, width: int = 760, panel_height: int = 180) -> str:
    """Stacked line-chart panels; ``panels`` is a list of (title, [(x, y), ...])."""
    margin_l, margin_r, margin_t, gap = 60, 20, 30, 40
    w = width - margin_l - margin_r
    total_h = margin_t + len(panels) * (panel_height + gap)
    body = []
    y = margin_t
    for title, lines in panels:
        body.append(_panel(lines, title, margin_l, y, w, panel_height))
        y += panel_height + gap
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total_h}" '
        f'viewBox="0 0 {width} {total_h}">\n<rect width="100%" height="100%" fill="white"/>\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )
