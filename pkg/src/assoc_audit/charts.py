"""Minimal SVG line-chart emitter for brightness series.

The geometry is intentionally simple and documented so tests can recompute
it: the plot area spans the data range exactly, x maps iterations left to
right and y maps values with the maximum at the top.
"""

from .brightness import BrightnessSeries
from .errors import DataError

WIDTH = 800
HEIGHT = 480
MARGIN_LEFT = 70
MARGIN_RIGHT = 150
MARGIN_TOP = 40
MARGIN_BOTTOM = 50

PALETTE = ["#d62728", "#7f3fbf", "#ff7f0e", "#000000", "#2ca02c", "#1f77b4"]


def scale_transform(iterations, values):
    """Return (x_of, y_of) mapping data coordinates to pixel coordinates."""
    x_min, x_max = min(iterations), max(iterations)
    y_min, y_max = min(values), max(values)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    x_span = x_max - x_min
    y_span = y_max - y_min

    def x_of(it):
        if x_span == 0:
            return MARGIN_LEFT + plot_w / 2.0
        return MARGIN_LEFT + (it - x_min) * plot_w / x_span

    def y_of(v):
        if y_span == 0:
            return MARGIN_TOP + plot_h / 2.0
        return MARGIN_TOP + (y_max - v) * plot_h / y_span

    return x_of, y_of


def render_series_svg(aggregates: dict[str, BrightnessSeries],
                      header_comment: str = "") -> str:
    """One polyline per group with labeled axes; returns the SVG text."""
    if not aggregates:
        raise DataError("no series to render")
    groups = sorted(aggregates)
    grid = aggregates[groups[0]].iterations
    all_values = [v for g in groups for v in aggregates[g].values]
    x_of, y_of = scale_transform(grid, all_values)
    x_min, x_max = min(grid), max(grid)
    y_min, y_max = min(all_values), max(all_values)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
    ]
    if header_comment:
        parts.append(f"<!-- {header_comment} -->")
    parts.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')

    ax_bottom = HEIGHT - MARGIN_BOTTOM
    ax_right = WIDTH - MARGIN_RIGHT
    parts.append(
        f'<line x1="{MARGIN_LEFT}" y1="{ax_bottom}" x2="{ax_right}" y2="{ax_bottom}" '
        'stroke="black"/>'
    )
    parts.append(
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{ax_bottom}" '
        'stroke="black"/>'
    )

    n_ticks = 5
    for i in range(n_ticks + 1):
        frac = i / n_ticks
        xv = x_min + frac * (x_max - x_min)
        xt = f"{xv:g}"
        px = x_of(xv)
        parts.append(
            f'<text x="{px:.2f}" y="{ax_bottom + 18}" font-size="11" '
            f'text-anchor="middle">{xt}</text>'
        )
        yv = y_min + frac * (y_max - y_min)
        py = y_of(yv)
        parts.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{py + 4:.2f}" font-size="11" '
            f'text-anchor="end">{yv:g}</text>'
        )
    parts.append(
        f'<text x="{(MARGIN_LEFT + ax_right) / 2:.2f}" y="{HEIGHT - 12}" '
        'font-size="13" text-anchor="middle">iteration</text>'
    )
    parts.append(
        f'<text x="18" y="{(MARGIN_TOP + ax_bottom) / 2:.2f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 18 {(MARGIN_TOP + ax_bottom) / 2:.2f})">'
        "brightness</text>"
    )

    for i, group in enumerate(groups):
        series = aggregates[group]
        if series.iterations != grid:
            raise DataError(f"series {group!r} is not on the shared iteration grid")
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(
            f"{x_of(it):.2f},{y_of(v):.2f}" for it, v in series.samples
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'data-group="{group}" points="{points}"/>'
        )
        ly = MARGIN_TOP + 16 + 18 * i
        parts.append(
            f'<line x1="{ax_right + 10}" y1="{ly - 4}" x2="{ax_right + 34}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{ax_right + 40}" y="{ly}" font-size="12">{group}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
