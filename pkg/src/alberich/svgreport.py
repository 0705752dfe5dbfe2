"""Deterministic SVG rendering for spectra and unit-cell schematics.

Hand-rolled on purpose: the reports must be byte-identical for identical
inputs (golden-file friendly), which rules out plotting libraries that embed
timestamps, font metrics, or version strings.  All coordinates are emitted
with a fixed two-decimal format.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .acoustics import STEEL_BACKING_MM, UnitCell

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_MARGIN_LEFT = 64.0
_MARGIN_RIGHT = 18.0
_MARGIN_TOP = 34.0
_MARGIN_BOTTOM = 48.0


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _text(x: float, y: float, content: str, anchor: str = "middle", size: int = 12) -> str:
    return (
        f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" '
        f'font-size="{size}" text-anchor="{anchor}">{content}</text>'
    )


def line_plot(
    series: Sequence[tuple[str, np.ndarray, np.ndarray]],
    title: str = "",
    x_label: str = "frequency (Hz)",
    y_label: str = "absorption",
    width: float = 640.0,
    height: float = 400.0,
    y_range: tuple[float, float] = (0.0, 1.0),
) -> str:
    """Render labelled (x, y) series as an SVG line plot with a log-10 x axis."""
    if not series:
        raise ValueError("at least one series is required")
    x_min = min(float(np.min(np.asarray(x, dtype=float))) for _, x, _ in series)
    x_max = max(float(np.max(np.asarray(x, dtype=float))) for _, x, _ in series)
    if x_min <= 0.0:
        raise ValueError("log-frequency axis requires positive x values")
    lo, hi = math.log10(x_min), math.log10(x_max)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    y_lo, y_hi = y_range
    if y_hi <= y_lo:
        raise ValueError("empty y range")

    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def sx(x: float) -> float:
        return _MARGIN_LEFT + plot_w * (math.log10(x) - lo) / (hi - lo)

    def sy(y: float) -> float:
        return _MARGIN_TOP + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
        f'<rect x="{_fmt(_MARGIN_LEFT)}" y="{_fmt(_MARGIN_TOP)}" width="{_fmt(plot_w)}" '
        f'height="{_fmt(plot_h)}" fill="none" stroke="#000000" stroke-width="1"/>',
    ]

    # Decade ticks (with minor 2..9 marks) on the log x axis.
    first_decade = math.ceil(lo - 1e-9)
    last_decade = math.floor(hi + 1e-9)
    for decade in range(first_decade, last_decade + 1):
        x = sx(10.0**decade)
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(_MARGIN_TOP)}" x2="{_fmt(x)}" '
            f'y2="{_fmt(_MARGIN_TOP + plot_h)}" stroke="#cccccc" stroke-width="1"/>'
        )
        parts.append(_text(x, _MARGIN_TOP + plot_h + 18.0, f"1e{decade}"))
        for minor in range(2, 10):
            value = minor * 10.0**decade
            if not (10.0**lo <= value <= 10.0**hi):
                continue
            x = sx(value)
            parts.append(
                f'<line x1="{_fmt(x)}" y1="{_fmt(_MARGIN_TOP + plot_h - 4.0)}" '
                f'x2="{_fmt(x)}" y2="{_fmt(_MARGIN_TOP + plot_h)}" '
                f'stroke="#999999" stroke-width="1"/>'
            )

    n_y_ticks = 5
    for i in range(n_y_ticks + 1):
        value = y_lo + (y_hi - y_lo) * i / n_y_ticks
        y = sy(value)
        parts.append(
            f'<line x1="{_fmt(_MARGIN_LEFT)}" y1="{_fmt(y)}" '
            f'x2="{_fmt(_MARGIN_LEFT + plot_w)}" y2="{_fmt(y)}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(_text(_MARGIN_LEFT - 8.0, y + 4.0, f"{value:.1f}", anchor="end"))

    for index, (label, x_values, y_values) in enumerate(series):
        x_arr = np.asarray(x_values, dtype=float)
        y_arr = np.asarray(y_values, dtype=float)
        if x_arr.shape != y_arr.shape or x_arr.ndim != 1:
            raise ValueError("each series needs matching 1-D x and y arrays")
        color = PALETTE[index % len(PALETTE)]
        points = " ".join(
            f"{_fmt(sx(float(x)))},{_fmt(sy(float(y)))}"
            for x, y in zip(x_arr, y_arr)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        legend_y = _MARGIN_TOP + 16.0 + 18.0 * index
        legend_x = _MARGIN_LEFT + plot_w - 150.0
        parts.append(
            f'<line x1="{_fmt(legend_x)}" y1="{_fmt(legend_y - 4.0)}" '
            f'x2="{_fmt(legend_x + 24.0)}" y2="{_fmt(legend_y - 4.0)}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(_text(legend_x + 30.0, legend_y, label, anchor="start"))

    if title:
        parts.append(_text(width / 2.0, 20.0, title, size=14))
    parts.append(_text(width / 2.0, height - 10.0, x_label))
    parts.append(
        f'<text x="16" y="{_fmt(_MARGIN_TOP + plot_h / 2.0)}" font-family="sans-serif" '
        f'font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {_fmt(_MARGIN_TOP + plot_h / 2.0)})">{y_label}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cell_schematic(cell: UnitCell, scale: float = 2.4) -> str:
    """Cross-section of the unit cell: coating slab, voids, steel backing.

    The incident wave travels left to right; x is depth through the coating
    thickness, y the lattice (height) direction.
    """
    margin = 26.0
    slab_w = cell.t * scale
    steel_w = STEEL_BACKING_MM * scale
    slab_h = cell.h * scale
    width = margin * 2 + slab_w + steel_w
    height = margin * 2 + slab_h + 22.0

    def px(x_mm: float) -> float:
        return margin + x_mm * scale

    def py(y_mm: float) -> float:
        return margin + (cell.h - y_mm) * scale

    voids = (
        (cell.D1, cell.B1, cell.r1),
        (cell.D1, cell.h - cell.B2, cell.r1),
        (cell.D2, cell.B3, cell.r2),
        (cell.D2, cell.h - cell.B4, cell.r2),
    )

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
        f'<rect x="{_fmt(px(0.0))}" y="{_fmt(py(cell.h))}" width="{_fmt(slab_w)}" '
        f'height="{_fmt(slab_h)}" fill="#e8d8b0" stroke="#000000" stroke-width="1"/>',
        f'<rect x="{_fmt(px(cell.t))}" y="{_fmt(py(cell.h))}" width="{_fmt(steel_w)}" '
        f'height="{_fmt(slab_h)}" fill="#b0b8c0" stroke="#000000" stroke-width="1"/>',
    ]
    for depth, center, radius in voids:
        parts.append(
            f'<circle cx="{_fmt(px(depth))}" cy="{_fmt(py(center))}" '
            f'r="{_fmt(radius * scale)}" fill="#ffffff" stroke="#000000" stroke-width="1"/>'
        )
    arrow_y = py(cell.h / 2.0)
    parts.append(
        f'<line x1="{_fmt(margin * 0.15)}" y1="{_fmt(arrow_y)}" '
        f'x2="{_fmt(px(0.0) - 4.0)}" y2="{_fmt(arrow_y)}" stroke="#1f77b4" stroke-width="2"/>'
    )
    parts.append(
        f'<path d="M {_fmt(px(0.0) - 4.0)} {_fmt(arrow_y - 5.0)} '
        f'L {_fmt(px(0.0) + 4.0)} {_fmt(arrow_y)} '
        f'L {_fmt(px(0.0) - 4.0)} {_fmt(arrow_y + 5.0)} Z" fill="#1f77b4"/>'
    )
    caption = (
        f"r1={cell.r1:g} r2={cell.r2:g} D1={cell.D1:g} D2={cell.D2:g} "
        f"h={cell.h:g} t={cell.t:g} (mm)"
    )
    parts.append(_text(width / 2.0, height - 8.0, caption, size=11))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, svg: str) -> None:
    with open(path, "w", newline="\n") as handle:
        handle.write(svg)
