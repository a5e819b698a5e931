"""Time-varying cartogram sequences.

Two coherence strategies: *direct* recomputes every time step from the
original map, *cumulative* reuses the previous step's deformed map (faster
for slowly varying data, but distortion can accumulate under rapid change;
a watchdog flags frames whose average shape distortion exceeds a ceiling).

The background-mass schedule turns the user's target area-fraction range
[A_min, A_max] over a time window into a per-step background mass:
    w      = (M_i(t) - M_min) / (M_max - M_min)
    A_i(t) = (1 - w) * A_min + w * A_max
    M_b(t) = M_i(t) * (1 - A_i(t)) / A_i(t)
so the equalized map occupies exactly the fraction A_i(t) of the domain.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .engine import CartogramEngine, RunResult, StoppingCriteria, DENSIFY_EDGE_PIXELS
from .errors import CartomorphError, IngestionError
from .geomodel import MapModel, densify
from .metrics import QualityReport, full_report
from .raster import rasterize_labels

log = logging.getLogger(__name__)

DEFAULT_WATCHDOG_CEILING = 0.5
DEFAULT_FRAMES_PER_STEP = 10


@dataclass(frozen=True)
class TimeSeriesDataset:
    """A map plus one positive statistic vector per time step."""

    mapmodel: MapModel
    times: tuple[str, ...]
    statistics: np.ndarray  # (T, V)

    def __post_init__(self):
        stats = np.asarray(self.statistics, dtype=float)
        if stats.ndim != 2 or stats.shape[0] != len(self.times):
            raise IngestionError("statistics must be (time, region) shaped")
        if stats.shape[1] != len(self.mapmodel.regions):
            raise IngestionError("statistics column count must match region count")
        if (stats <= 0).any() or not np.isfinite(stats).all():
            raise IngestionError("all statistics must be positive and finite")
        object.__setattr__(self, "statistics", stats)

    @property
    def step_count(self) -> int:
        return len(self.times)

    def totals(self) -> np.ndarray:
        """M_i(t): the statistic mass summed over regions, per time step."""
        return self.statistics.sum(axis=1)

    def map_at(self, t: int) -> MapModel:
        return self.mapmodel.with_statistics(self.statistics[t])


@dataclass(frozen=True)
class AreaFractionPolicy:
    """Target map area fractions at the window's extreme mass values."""

    a_min: float
    a_max: float
    window: tuple[int, int] | None = None  # inclusive time-index interval

    def __post_init__(self):
        if not (0.0 < self.a_min < self.a_max < 1.0):
            raise ValueError("need 0 < a_min < a_max < 1")
        if self.window is not None:
            t0, t1 = self.window
            if t0 > t1:
                raise ValueError("window must be ordered")


def background_mass_schedule(dataset: TimeSeriesDataset, policy: AreaFractionPolicy):
    """Per-time (M_b, A_i) from the area-fraction schedule.

    The interpolation weight is clamped to [0, 1] for times outside the
    selected window so the area fraction stays within [a_min, a_max].
    """
    totals = dataset.totals()
    t0, t1 = policy.window or (0, dataset.step_count - 1)
    if not (0 <= t0 <= t1 < dataset.step_count):
        raise ValueError("window outside dataset range")
    m_min = float(totals[t0 : t1 + 1].min())
    m_max = float(totals[t0 : t1 + 1].max())
    if m_max == m_min:
        log.info("constant mass over the window; using w = 1 for all time steps")
        w = np.ones_like(totals)
    else:
        w = np.clip((totals - m_min) / (m_max - m_min), 0.0, 1.0)
    area_fraction = (1.0 - w) * policy.a_min + w * policy.a_max
    background_mass = totals * (1.0 - area_fraction) / area_fraction
    return background_mass, area_fraction


@dataclass
class Frame:
    time_index: int
    time: str
    mapmodel: MapModel | None
    result: RunResult | None
    report: QualityReport | None
    background_mass: float
    area_fraction: float | None
    wall_ms: float
    watchdog: bool = False
    error: str | None = None


@dataclass
class FrameSequence:
    strategy: str  # direct | cumulative
    dataset: TimeSeriesDataset
    base_map: MapModel  # densified original geometry all frames share
    frames: list[Frame] = field(default_factory=list)

    def series(self) -> dict:
        """Per-time series for plotting: mass, area fraction, errors, timing."""
        totals = self.dataset.totals()
        return {
            "times": list(self.dataset.times),
            "M_i": [float(v) for v in totals],
            "M_b": [f.background_mass for f in self.frames],
            "A_i": [
                f.area_fraction
                if f.area_fraction is not None
                else float(t / (t + f.background_mass))
                for f, t in zip(self.frames, totals)
            ],
            "epsilon": [f.report.epsilon if f.report else None for f in self.frames],
            "xi": [f.report.xi if f.report else None for f in self.frames],
            "hamming_avg": [f.report.hamming_avg if f.report else None for f in self.frames],
            "position_error": [
                f.report.position_error if f.report else None for f in self.frames
            ],
            "wall_ms": [f.wall_ms for f in self.frames],
            "watchdog": [f.watchdog for f in self.frames],
            "errors": [f.error for f in self.frames],
        }


def _default_background_masses(dataset: TimeSeriesDataset, k: int, bdv_multiplier: float):
    """Per-step background mass giving each step its own default density.

    Uses the original (undeformed) map's pixel split, for both strategies.
    """
    labels = rasterize_labels(dataset.mapmodel, k)
    n_map = labels.map_pixel_count()
    n_bg = labels.background_count()
    return bdv_multiplier * dataset.totals() / n_map * n_bg


def _run_frames(
    dataset: TimeSeriesDataset,
    criteria: StoppingCriteria,
    policy: AreaFractionPolicy | None,
    k: int,
    bdv_multiplier: float,
    cumulative: bool,
    watchdog_ceiling: float,
    report_raster_k: int,
) -> FrameSequence:
    if policy is None:
        masses = _default_background_masses(dataset, k, bdv_multiplier)
        fractions = [None] * dataset.step_count
    else:
        masses, fractions = background_mass_schedule(dataset, policy)

    base_map = densify(dataset.mapmodel, DENSIFY_EDGE_PIXELS / (1 << k))
    seq = FrameSequence(
        strategy="cumulative" if cumulative else "direct",
        dataset=dataset,
        base_map=base_map,
    )
    previous_geometry = base_map
    for t in range(dataset.step_count):
        stats_t = dataset.statistics[t]
        start_map = (previous_geometry if cumulative else base_map).with_statistics(stats_t)
        began = time.perf_counter()
        try:
            engine = CartogramEngine(
                start_map,
                criteria=criteria,
                k=k,
                background_mass=float(masses[t]),
                apply_densify=False,
            )
            result = engine.run()
            # wall time covers the deformation only; reports are bookkeeping
            wall_ms = (time.perf_counter() - began) * 1e3
            carto = result.state.mapmodel
            total_mass = float(stats_t.sum() + masses[t])
            weights = stats_t / total_mass  # desired fractions of the unit domain
            report = full_report(
                base_map.with_statistics(stats_t),
                carto,
                weights=weights,
                raster_k=report_raster_k,
                wall_ms=wall_ms,
            )
            frame = Frame(
                time_index=t,
                time=dataset.times[t],
                mapmodel=carto,
                result=result,
                report=report,
                background_mass=float(masses[t]),
                area_fraction=None if fractions[t] is None else float(fractions[t]),
                wall_ms=wall_ms,
                watchdog=report.hamming_avg > watchdog_ceiling,
            )
            if frame.watchdog:
                log.warning(
                    "%s frame %d: average shape distortion %.3f exceeds ceiling %.3f",
                    seq.strategy,
                    t,
                    report.hamming_avg,
                    watchdog_ceiling,
                )
            if cumulative:
                previous_geometry = carto
        except CartomorphError as exc:
            wall_ms = (time.perf_counter() - began) * 1e3
            log.error("%s frame %d failed: %s", seq.strategy, t, exc)
            frame = Frame(
                time_index=t,
                time=dataset.times[t],
                mapmodel=None,
                result=None,
                report=None,
                background_mass=float(masses[t]),
                area_fraction=None if fractions[t] is None else float(fractions[t]),
                wall_ms=wall_ms,
                error=str(exc),
            )
        seq.frames.append(frame)
    return seq


def run_direct(
    dataset: TimeSeriesDataset,
    criteria: StoppingCriteria | None = None,
    policy: AreaFractionPolicy | None = None,
    k: int = 10,
    bdv_multiplier: float = 1.0,
    watchdog_ceiling: float = DEFAULT_WATCHDOG_CEILING,
    report_raster_k: int = 7,
) -> FrameSequence:
    """Every frame deformed independently from the original map."""
    return _run_frames(
        dataset,
        criteria or StoppingCriteria(),
        policy,
        k,
        bdv_multiplier,
        cumulative=False,
        watchdog_ceiling=watchdog_ceiling,
        report_raster_k=report_raster_k,
    )


def run_cumulative(
    dataset: TimeSeriesDataset,
    criteria: StoppingCriteria | None = None,
    policy: AreaFractionPolicy | None = None,
    k: int = 10,
    bdv_multiplier: float = 1.0,
    watchdog_ceiling: float = DEFAULT_WATCHDOG_CEILING,
    report_raster_k: int = 7,
) -> FrameSequence:
    """Each frame starts from the previous frame's deformed map."""
    return _run_frames(
        dataset,
        criteria or StoppingCriteria(),
        policy,
        k,
        bdv_multiplier,
        cumulative=True,
        watchdog_ceiling=watchdog_ceiling,
        report_raster_k=report_raster_k,
    )


def interpolate_vertices(a: MapModel, b: MapModel, fraction: float) -> MapModel:
    """Linear per-vertex blend of two frames with identical vertex layout."""
    va = a.vertex_array()
    vb = b.vertex_array()
    if va.shape != vb.shape:
        raise ValueError("vertex-count mismatch between frames")
    sa = a.statistics()
    sb = b.statistics()
    blended = a.with_vertex_array(va + fraction * (vb - va))
    return blended.with_statistics(sa + fraction * (sb - sa))


def interpolate_frames(seq: FrameSequence, frames_per_step: int = DEFAULT_FRAMES_PER_STEP):
    """Dense animation frames: ``frames_per_step`` blends per step pair.

    Returns a list of (label, MapModel).  Failed frames are skipped together
    with the step pairs they would anchor.
    """
    if frames_per_step < 1:
        raise ValueError("frames_per_step must be >= 1")
    frames = [f for f in seq.frames]
    out: list[tuple[str, MapModel]] = []
    for idx in range(len(frames)):
        cur = frames[idx]
        if cur.mapmodel is None:
            continue
        out.append((cur.time, cur.mapmodel))
        if idx + 1 >= len(frames) or frames[idx + 1].mapmodel is None:
            continue
        nxt = frames[idx + 1]
        for sub in range(1, frames_per_step):
            u = sub / frames_per_step
            out.append((f"{cur.time}+{u:.3f}", interpolate_vertices(cur.mapmodel, nxt.mapmodel, u)))
    return out
