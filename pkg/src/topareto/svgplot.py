"""Hand-rolled SVG charts: line plots, log-log scatters, density rasters.

No plotting dependency; output is deterministic text so identical runs
emit byte-identical files.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError
from .fem2d import Grid

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")
MARGIN = 56.0


def _transform(vals, lo, hi, out_lo, out_hi, log):
    if log:
        vals = np.log10(vals)
        lo, hi = math.log10(lo), math.log10(hi)
    if hi <= lo:
        hi = lo + 1.0
    return out_lo + (np.asarray(vals) - lo) / (hi - lo) * (out_hi - out_lo)


def _ticks(lo, hi, log, count=5):
    if log:
        lo10, hi10 = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        return [10.0 ** k for k in range(lo10, hi10 + 1)]
    return list(np.linspace(lo, hi, count))


def _axes(parts, lo_x, hi_x, lo_y, hi_y, width, height, xlabel, ylabel,
          logx, logy):
    parts.append(f'<rect x="{MARGIN:.2f}" y="{MARGIN / 2:.2f}" '
                 f'width="{width - 1.5 * MARGIN:.2f}" height="{height - 1.5 * MARGIN:.2f}" '
                 f'fill="none" stroke="#333" stroke-width="1"/>')
    for tv in _ticks(lo_x, hi_x, logx):
        if tv < lo_x * (1 - 1e-12) or tv > hi_x * (1 + 1e-12):
            continue
        px = float(_transform([tv], lo_x, hi_x, MARGIN, width - MARGIN / 2, logx)[0])
        parts.append(f'<line x1="{px:.2f}" y1="{height - MARGIN:.2f}" '
                     f'x2="{px:.2f}" y2="{height - MARGIN + 5:.2f}" stroke="#333"/>')
        parts.append(f'<text x="{px:.2f}" y="{height - MARGIN + 18:.2f}" '
                     f'font-size="11" text-anchor="middle">{tv:.6g}</text>')
    for tv in _ticks(lo_y, hi_y, logy):
        if tv < lo_y * (1 - 1e-12) or tv > hi_y * (1 + 1e-12):
            continue
        py = float(_transform([tv], lo_y, hi_y, height - MARGIN, MARGIN / 2, logy)[0])
        parts.append(f'<line x1="{MARGIN - 5:.2f}" y1="{py:.2f}" '
                     f'x2="{MARGIN:.2f}" y2="{py:.2f}" stroke="#333"/>')
        parts.append(f'<text x="{MARGIN - 8:.2f}" y="{py + 4:.2f}" '
                     f'font-size="11" text-anchor="end">{tv:.6g}</text>')
    parts.append(f'<text x="{(width) / 2:.2f}" y="{height - 12:.2f}" '
                 f'font-size="12" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="14" y="{height / 2:.2f}" font-size="12" '
                 f'text-anchor="middle" transform="rotate(-90 14 {height / 2:.2f})">'
                 f'{ylabel}</text>')


def chart(series, xlabel="", ylabel="", title="", width=640.0, height=420.0,
          logx=False, logy=False, markers=False) -> str:
    """Render labeled (xs, ys) series as one SVG line/scatter chart."""
    if not series:
        raise InvalidArgumentError("chart needs at least one series")
    all_x = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    all_y = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    if logx and np.any(all_x <= 0) or logy and np.any(all_y <= 0):
        raise InvalidArgumentError("log axes need positive data")
    lo_x, hi_x = float(all_x.min()), float(all_x.max())
    lo_y, hi_y = float(all_y.min()), float(all_y.max())
    if hi_y == lo_y:
        lo_y, hi_y = lo_y - 0.5, hi_y + 0.5
    if hi_x == lo_x:
        lo_x, hi_x = lo_x - 0.5, hi_x + 0.5

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
             f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
             f'<text x="{width / 2:.2f}" y="20" font-size="14" '
             f'text-anchor="middle">{title}</text>']
    _axes(parts, lo_x, hi_x, lo_y, hi_y, width, height, xlabel, ylabel, logx, logy)
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        px = _transform(np.asarray(xs, dtype=float), lo_x, hi_x, MARGIN,
                        width - MARGIN / 2, logx)
        py = _transform(np.asarray(ys, dtype=float), lo_y, hi_y,
                        height - MARGIN, MARGIN / 2, logy)
        if markers or len(px) == 1:
            for x, y in zip(px, py):
                parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" '
                             f'fill="{color}"/>')
        else:
            pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
            parts.append(f'<polyline points="{pts}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN / 2 + 14 + 16 * i
        lx = width - MARGIN / 2 - 150
        parts.append(f'<line x1="{lx:.2f}" y1="{ly - 4:.2f}" x2="{lx + 22:.2f}" '
                     f'y2="{ly - 4:.2f}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 28:.2f}" y="{ly:.2f}" font-size="11">'
                     f'{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def density_raster(values, grid: Grid, cell: float = 8.0) -> str:
    """Grayscale raster of a density field (dark = solid)."""
    img = np.asarray(values, dtype=float).reshape(grid.nelx, grid.nely).T
    w = grid.nelx * cell
    h = grid.nely * cell
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" '
             f'height="{h:.0f}" viewBox="0 0 {w:.0f} {h:.0f}">']
    parts.append(f'<rect x="0" y="0" width="{w:.0f}" height="{h:.0f}" fill="#fff"/>')
    for iy in range(grid.nely):
        for ix in range(grid.nelx):
            g = int(round(255 * (1.0 - img[iy, ix])))
            if g >= 255:
                continue
            parts.append(f'<rect x="{ix * cell:.1f}" y="{iy * cell:.1f}" '
                         f'width="{cell:.1f}" height="{cell:.1f}" '
                         f'fill="rgb({g},{g},{g})"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def ashby_chart(groups, title="modulus vs density") -> str:
    """Log-log scatter of (rho, E) material groups, e.g. screening stages."""
    series = []
    for label, mats in groups:
        if not mats:
            continue
        series.append((label, [m.rho for m in mats], [m.e for m in mats]))
    return chart(series, xlabel="density rho (kg/m^3)", ylabel="Young's modulus E (Pa)",
                 title=title, logx=True, logy=True, markers=True)
