"""Synthetic polygonal maps with attached statistics.

Deterministic builders used by the test suite, the bundled data files and
the demo scripts.  Maps are jittered grids of quads (plus optional island
squares), so they are contiguous, share boundary vertices exactly and have
controllable region counts.
"""

from __future__ import annotations

import numpy as np

from .geomodel import MapModel, Region, detect_adjacencies, normalize, with_adjacency


def _grid_regions(rows: int, cols: int, jitter: float, seed: int) -> list[Region]:
    rng = np.random.default_rng(seed)
    xs = np.linspace(0.0, 1.0, cols + 1)
    ys = np.linspace(0.0, 1.0, rows + 1)
    nodes = np.stack(np.meshgrid(xs, ys), axis=-1)  # (rows+1, cols+1, 2)
    if jitter > 0:
        bump = rng.uniform(-jitter, jitter, size=nodes.shape)
        bump[0, :] = bump[-1, :] = 0.0
        bump[:, 0] = bump[:, -1] = 0.0
        nodes = nodes + bump
    regions = []
    idx = 0
    for r in range(rows):
        for c in range(cols):
            ring = np.array(
                [nodes[r, c], nodes[r, c + 1], nodes[r + 1, c + 1], nodes[r + 1, c]]
            )
            rid = f"R{idx:02d}"
            regions.append(Region(rid, rid, (ring,), 1.0))
            idx += 1
    return regions


def _statistics(count: int, seed: int, spread: float = 0.6, dominant: float | None = None):
    rng = np.random.default_rng(seed)
    s = np.exp(rng.normal(0.0, spread, size=count))
    s = np.clip(s, 0.35, 4.0)
    if dominant is not None:
        s[int(rng.integers(count))] *= dominant
    return s * 100.0


def grid_map(
    rows: int,
    cols: int,
    seed: int = 0,
    jitter_frac: float = 0.25,
    spread: float = 0.6,
    dominant: float | None = None,
    scaling: float = 0.9,
) -> MapModel:
    """A jittered rows x cols quad grid with lognormal statistics."""
    jitter = jitter_frac / max(rows, cols)
    regions = _grid_regions(rows, cols, jitter, seed)
    m = MapModel(regions=tuple(regions))
    m = m.with_statistics(_statistics(rows * cols, seed + 1, spread, dominant))
    m = normalize(m, scaling)
    return with_adjacency(m, epsilon=0.5 / 1024)


def two_region_map(statistics=(1.0, 3.0), split: float = 0.5, scaling: float = 0.9) -> MapModel:
    """Unit square split vertically: the analytic two-region benchmark."""
    left = np.array([[0.0, 0.0], [split, 0.0], [split, 1.0], [0.0, 1.0]])
    right = np.array([[split, 0.0], [1.0, 0.0], [1.0, 1.0], [split, 1.0]])
    regions = (
        Region("A", "A", (left,), float(statistics[0])),
        Region("B", "B", (right,), float(statistics[1])),
    )
    m = normalize(MapModel(regions=regions), scaling)
    return with_adjacency(m, epsilon=0.5 / 1024)


def france_style(seed: int = 11) -> MapModel:
    """13 regions, one dominant statistic (metropolitan-regions flavor)."""
    jitter = 0.25 / 4
    regions = _grid_regions(3, 4, jitter, seed)[:12]
    # a 13th region appended as a bottom strip to break the pure grid
    strip = np.array([[0.0, 1.0], [1.0, 1.0], [1.0, 1.18], [0.0, 1.18]])
    regions = [
        Region(f"R{idx:02d}", f"R{idx:02d}", r.rings, 1.0) for idx, r in enumerate(regions)
    ]
    regions.append(Region("R12", "R12", (strip,), 1.0))
    m = MapModel(regions=tuple(regions))
    m = m.with_statistics(_statistics(13, seed, spread=0.5, dominant=5.0))
    m = normalize(m, 0.9)
    return with_adjacency(m, epsilon=0.5 / 1024)


def germany_style(seed: int = 7) -> MapModel:
    """16 regions (federal-states flavor)."""
    return grid_map(4, 4, seed=seed, spread=0.55, dominant=3.0)


def netherlands_style(seed: int = 5) -> MapModel:
    """12 regions (provinces flavor)."""
    return grid_map(3, 4, seed=seed, spread=0.5, dominant=2.5)


def usa_style(seed: int = 3) -> MapModel:
    """49 regions (lower-48 plus DC flavor)."""
    return grid_map(7, 7, seed=seed, spread=0.5, dominant=2.0)


def eight_region_map(seed: int = 2) -> MapModel:
    """Small 8-region fixture with uneven statistics (temporal tests)."""
    return grid_map(2, 4, seed=seed, spread=0.45)


def checkerboard_eight(rel: float = 0.10) -> MapModel:
    """Regular 2x4 grid, statistics = area * (1 +/- rel) in a checkerboard.

    Symmetric geometry and alternating statistics leave no lateral bias, so
    the background-density sweep isolates the background's own effect on
    shape distortion.
    """
    regions = _grid_regions(2, 4, 0.0, 0)
    regions = [
        Region(f"R{idx:02d}", f"R{idx:02d}", r.rings, 1.0) for idx, r in enumerate(regions)
    ]
    m = normalize(MapModel(regions=tuple(regions)), 0.9)
    sign = np.array([1 if (i // 4 + i % 4) % 2 == 0 else -1 for i in range(8)])
    areas = np.array([r.area() for r in m.regions])
    m = m.with_statistics(areas * (1.0 + rel * sign) * 1000.0)
    return with_adjacency(m, epsilon=0.5 / 1024)


def europe_style(seed: int = 13) -> MapModel:
    """Many regions plus two islands disconnected from the mainland."""
    jitter = 0.2 / 6
    regions = _grid_regions(5, 6, jitter, seed)
    def island(x0, y0, size, rid):
        ring = np.array(
            [[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size]]
        )
        return Region(rid, rid, (ring,), 1.0)

    regions = [
        Region(f"R{idx:02d}", f"R{idx:02d}", r.rings, 1.0) for idx, r in enumerate(regions)
    ]
    regions.append(island(-0.35, -0.30, 0.12, "I30"))
    regions.append(island(1.22, 0.95, 0.10, "I31"))
    m = MapModel(regions=tuple(regions))
    m = m.with_statistics(_statistics(32, seed + 1, spread=0.8, dominant=4.0))
    m = normalize(m, 0.9)
    return with_adjacency(m, epsilon=0.5 / 1024)


def smooth_series(mapmodel: MapModel, steps: int = 20, amplitude: float = 0.08, seed: int = 4):
    """Per-time statistics oscillating smoothly (<= ~3% per-step change)."""
    from .temporal import TimeSeriesDataset

    rng = np.random.default_rng(seed)
    base = mapmodel.statistics()
    phases = rng.uniform(0, 2 * np.pi, size=base.size)
    t = np.arange(steps)
    values = base[None, :] * (
        1.0 + amplitude * np.sin(2 * np.pi * t[:, None] / steps + phases[None, :])
    )
    times = tuple(f"t{i:02d}" for i in range(steps))
    return TimeSeriesDataset(mapmodel, times, values)


def volatile_series(mapmodel: MapModel, steps: int = 12, factor: float = 6.0, seed: int = 9):
    """Per-time statistics with abrupt jumps (stress case for cumulative mode)."""
    from .temporal import TimeSeriesDataset

    rng = np.random.default_rng(seed)
    base = mapmodel.statistics()
    values = []
    for i in range(steps):
        swing = factor if (i // 2) % 2 else 1.0 / factor
        bump = np.where(rng.uniform(size=base.size) < 0.5, swing, 1.0)
        values.append(base * bump)
    times = tuple(f"t{i:02d}" for i in range(steps))
    return TimeSeriesDataset(mapmodel, times, np.array(values))
