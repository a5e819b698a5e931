"""SVG rendering of maps and cartograms with the shared color ramp.

Regions are filled through a fixed ramp (the same JSON definition the
browser frontend loads), colored by a per-region value such as shape
distortion or cartographic error, with an embedded legend.
"""

from __future__ import annotations

import importlib.resources
import json

import numpy as np

from .geomodel import MapModel

_RAMP_CACHE: dict | None = None


def load_ramp() -> dict:
    global _RAMP_CACHE
    if _RAMP_CACHE is None:
        text = (
            importlib.resources.files("cartomorph")
            .joinpath("assets/color_ramp.json")
            .read_text()
        )
        _RAMP_CACHE = json.loads(text)
    return _RAMP_CACHE


def ramp_color(value: float, lo: float, hi: float) -> str:
    """Map a value through the ramp; returns an ``rgb(...)`` string."""
    ramp = load_ramp()
    stops = ramp["stops"]
    if hi <= lo:
        t = 0.0
    else:
        t = min(max((value - lo) / (hi - lo), 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(stops, stops[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            rgb = [round(a + f * (b - a)) for a, b in zip(c0, c1)]
            return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"
    rgb = stops[-1][1]
    return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"


def _path_data(rings, size: float) -> str:
    parts = []
    for ring in rings:
        coords = np.asarray(ring) * size
        steps = [f"M {coords[0, 0]:.2f} {coords[0, 1]:.2f}"]
        steps.extend(f"L {x:.2f} {y:.2f}" for x, y in coords[1:])
        steps.append("Z")
        parts.append(" ".join(steps))
    return " ".join(parts)


def render_svg(
    mapmodel: MapModel,
    values: dict[str, float] | None = None,
    value_label: str = "",
    size: int = 800,
    legend: bool = True,
) -> str:
    """An SVG document of the map, colored by per-region values.

    ``values`` maps region id to the quantity driving the fill color; with
    no values every region gets a neutral fill.  The internal y-down frame
    matches SVG's, so coordinates are emitted as stored.
    """
    ramp = load_ramp()
    missing = ramp["missing"]
    neutral = f"rgb({missing[0]},{missing[1]},{missing[2]})"
    if values:
        finite = [v for v in values.values() if v is not None]
        lo = min(finite) if finite else 0.0
        hi = max(finite) if finite else 1.0
    else:
        lo, hi = 0.0, 1.0

    rows = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + (70 if legend else 0)}" '
        f'viewBox="0 0 {size} {size + (70 if legend else 0)}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for reg in mapmodel.regions:
        if values and reg.region_id in values and values[reg.region_id] is not None:
            fill = ramp_color(values[reg.region_id], lo, hi)
        else:
            fill = neutral
        d = _path_data(reg.rings, size)
        rows.append(
            f'<path d="{d}" fill="{fill}" stroke="black" stroke-width="0.8" '
            f'fill-rule="evenodd"><title>{reg.name}</title></path>'
        )
    if legend:
        rows.append(_legend_svg(lo, hi, value_label, size))
    rows.append("</svg>")
    return "\n".join(rows) + "\n"


def _legend_svg(lo: float, hi: float, label: str, size: int) -> str:
    bar_w = size - 120
    cells = []
    steps = 64
    for idx in range(steps):
        t = idx / (steps - 1)
        color = ramp_color(lo + t * (hi - lo), lo, hi)
        x = 60 + bar_w * idx / steps
        cells.append(
            f'<rect x="{x:.2f}" y="{size + 20}" width="{bar_w / steps + 0.5:.2f}" height="16" fill="{color}"/>'
        )
    cells.append(
        f'<text x="60" y="{size + 52}" font-size="12" font-family="sans-serif">{lo:.4g}</text>'
    )
    cells.append(
        f'<text x="{60 + bar_w}" y="{size + 52}" font-size="12" font-family="sans-serif" '
        f'text-anchor="end">{hi:.4g}</text>'
    )
    if label:
        cells.append(
            f'<text x="{size / 2}" y="{size + 14}" font-size="13" font-family="sans-serif" '
            f'text-anchor="middle">{label}</text>'
        )
    return "".join(cells)
