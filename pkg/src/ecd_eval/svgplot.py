"""Self-contained SVG rendering for density profiles.

No plotting dependency: the output is a single SVG string with two
polylines (green and blue), axis labels, and dashed peak markers.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

from ecd_eval.ragability import DensityProfile

_WIDTH = 800
_HEIGHT = 480
_MARGIN_LEFT = 64
_MARGIN_RIGHT = 24
_MARGIN_TOP = 40
_MARGIN_BOTTOM = 48

_GREEN = "#2f9e44"
_BLUE = "#1971c2"


def _scale(value: float, lo: float, hi: float, out_lo: float, out_hi: float) -> float:
    if hi == lo:
        return (out_lo + out_hi) / 2.0
    return out_lo + (value - lo) * (out_hi - out_lo) / (hi - lo)


def _polyline(xs, ys, x_range, y_max, color: str) -> str:
    points = " ".join(
        f"{_scale(x, x_range[0], x_range[1], _MARGIN_LEFT, _WIDTH - _MARGIN_RIGHT):.2f},"
        f"{_scale(y, 0.0, y_max, _HEIGHT - _MARGIN_BOTTOM, _MARGIN_TOP):.2f}"
        for x, y in zip(xs, ys)
    )
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
    )


def _peak_marker(peak: float, x_range, color: str, label_y: int) -> str:
    px = _scale(peak, x_range[0], x_range[1], _MARGIN_LEFT, _WIDTH - _MARGIN_RIGHT)
    return (
        f'<line x1="{px:.2f}" y1="{_MARGIN_TOP}" x2="{px:.2f}" '
        f'y2="{_HEIGHT - _MARGIN_BOTTOM}" stroke="{color}" stroke-width="1" '
        f'stroke-dasharray="4 3"/>'
        f'<text x="{px + 4:.2f}" y="{label_y}" font-size="12" fill="{color}">'
        f"peak {peak:.4f}</text>"
    )


def density_svg(profile: DensityProfile, title: str = "RAG-ability profile") -> str:
    """Render a density profile as a standalone SVG document string."""
    grid = profile.grid
    x_range = (float(grid[0]), float(grid[-1]))
    y_max = float(max(profile.green_density.max(), profile.blue_density.max()))
    if y_max <= 0:
        y_max = 1.0

    axis_y = _HEIGHT - _MARGIN_BOTTOM
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH // 2}" y="24" font-size="16" text-anchor="middle">'
        f"{escape(title)}</text>",
        f'<line x1="{_MARGIN_LEFT}" y1="{axis_y}" x2="{_WIDTH - _MARGIN_RIGHT}" '
        f'y2="{axis_y}" stroke="black" stroke-width="1"/>',
        f'<line x1="{_MARGIN_LEFT}" y1="{_MARGIN_TOP}" x2="{_MARGIN_LEFT}" '
        f'y2="{axis_y}" stroke="black" stroke-width="1"/>',
        f'<text x="{_MARGIN_LEFT}" y="{axis_y + 18}" font-size="12" '
        f'text-anchor="middle">{x_range[0]:.3f}</text>',
        f'<text x="{_WIDTH - _MARGIN_RIGHT}" y="{axis_y + 18}" font-size="12" '
        f'text-anchor="middle">{x_range[1]:.3f}</text>',
        f'<text x="{_MARGIN_LEFT - 8}" y="{_MARGIN_TOP + 4}" font-size="12" '
        f'text-anchor="end">{y_max:.3f}</text>',
        f'<text x="{_MARGIN_LEFT - 8}" y="{axis_y}" font-size="12" '
        f'text-anchor="end">0</text>',
        _polyline(grid, profile.green_density, x_range, y_max, _GREEN),
        _polyline(grid, profile.blue_density, x_range, y_max, _BLUE),
        _peak_marker(profile.green_peak, x_range, _GREEN, _MARGIN_TOP + 16),
        _peak_marker(profile.blue_peak, x_range, _BLUE, _MARGIN_TOP + 32),
        "</svg>",
    ]
    return "".join(parts) + "\n"
