"""Deterministic standalone SVG line charts for error traces.

No external references, fixed float formatting, log-log axes: the output
is diffable and safe to regenerate in tests.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 440
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 78, 24, 34, 56
ERROR_FLOOR = 1e-12

SERIES_COLORS = {
    "ols": "#1f77b4",
    "l2norm": "#2ca02c",
    "l1norm": "#d62728",
}
_FALLBACK_COLOR = "#7f7f7f"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _decades(lo: float, hi: float) -> list:
    return [10.0 ** k for k in range(math.ceil(math.log10(lo) - 1e-9),
                                     math.floor(math.log10(hi) + 1e-9) + 1)]


def _tick_label(value: float) -> str:
    exp = round(math.log10(value))
    if -3 <= exp <= 3:
        return f"{value:g}"
    return f"1e{exp:+d}"


def error_trace_svg(series: dict, title: str) -> str:
    """Render one chart: log error versus log sample size, one polyline per
    estimator plus a legend. ``series`` maps estimator name to a list of
    (T, error) pairs; None errors are skipped, nonpositive errors clamp to
    the display floor."""
    xs = [t for pts in series.values() for t, _ in pts]
    if not xs:
        raise ValueError("nothing to plot")
    errs = [max(e, ERROR_FLOOR) for pts in series.values()
            for _, e in pts if e is not None]
    x_lo, x_hi = min(xs), max(xs)
    y_lo = min(errs) if errs else ERROR_FLOOR
    y_hi = max(errs) if errs else 1.0
    if x_lo == x_hi:
        x_hi = x_lo * 10.0
    if y_lo == y_hi:
        y_lo, y_hi = y_lo / 10.0, y_hi * 10.0

    lx_lo, lx_hi = math.log10(x_lo), math.log10(x_hi)
    ly_lo, ly_hi = math.log10(y_lo), math.log10(y_hi)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(t: float) -> float:
        return MARGIN_LEFT + plot_w * (math.log10(t) - lx_lo) / (lx_hi - lx_lo)

    def py(e: float) -> float:
        return MARGIN_TOP + plot_h * (ly_hi - math.log10(e)) / (ly_hi - ly_lo)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]
    # frame and decade grid
    parts.append(
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#000000" stroke-width="1"/>')
    for tick in _decades(x_lo, x_hi):
        x = px(tick)
        parts.append(f'<line x1="{_fmt(x)}" y1="{MARGIN_TOP}" x2="{_fmt(x)}" '
                     f'y2="{MARGIN_TOP + plot_h}" stroke="#dddddd" '
                     f'stroke-width="1"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{MARGIN_TOP + plot_h + 18}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{_tick_label(tick)}</text>')
    for tick in _decades(y_lo, y_hi):
        y = py(tick)
        parts.append(f'<line x1="{MARGIN_LEFT}" y1="{_fmt(y)}" '
                     f'x2="{MARGIN_LEFT + plot_w}" y2="{_fmt(y)}" '
                     f'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{MARGIN_LEFT - 6}" y="{_fmt(y + 4)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{_tick_label(tick)}</text>')
    parts.append(
        f'<text x="{MARGIN_LEFT + plot_w / 2:.0f}" y="{HEIGHT - 12}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12">'
        f'samples T</text>')
    parts.append(
        f'<text x="16" y="{MARGIN_TOP + plot_h / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" transform="rotate(-90 16 '
        f'{MARGIN_TOP + plot_h / 2:.0f})">Frobenius error</text>')

    for name, pts in series.items():
        color = SERIES_COLORS.get(name, _FALLBACK_COLOR)
        coords = " ".join(
            f"{_fmt(px(t))},{_fmt(py(max(e, ERROR_FLOOR)))}"
            for t, e in pts if e is not None)
        if coords:
            parts.append(f'<polyline points="{coords}" fill="none" '
                         f'stroke="{color}" stroke-width="2"/>')

    legend_x = MARGIN_LEFT + plot_w - 110
    legend_y = MARGIN_TOP + 10
    parts.append(f'<rect x="{legend_x - 8}" y="{legend_y - 6}" width="112" '
                 f'height="{18 * len(series) + 8}" fill="#ffffff" '
                 f'stroke="#999999" stroke-width="1"/>')
    for k, name in enumerate(series):
        color = SERIES_COLORS.get(name, _FALLBACK_COLOR)
        y = legend_y + 18 * k + 6
        parts.append(f'<line x1="{legend_x}" y1="{y}" x2="{legend_x + 22}" '
                     f'y2="{y}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{legend_x + 28}" y="{y + 4}" '
                     f'font-family="sans-serif" font-size="11">'
                     f'{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_error_trace_svg(path, series: dict, title: str) -> None:
    with open(path, "w") as fh:
        fh.write(error_trace_svg(series, title))
