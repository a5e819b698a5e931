"""Iterative construction of a single contiguous cartogram.

Each iteration: count region pixels, rebuild the piecewise-constant density
(statistics never change), recompute integral images, evaluate the residual
displacement field and advect every boundary vertex through it.  Iteration
stops when the maximum cartographic error drops below the threshold, when
it has not improved for a stagnation window (the best state seen is kept),
or at the iteration cap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .displacement import advect, base_mapping, residual_field
from .errors import NumericError, RegionCollapsedError
from .geomodel import MapModel, densify
from .integral import integral_images
from .raster import LabelTexture, build_density, rasterize_labels

DENSIFY_EDGE_PIXELS = 4.0


@dataclass(frozen=True)
class StoppingCriteria:
    error_threshold: float = 0.01
    stagnation_window: int = 32
    max_iterations: int = 512

    def __post_init__(self):
        if self.error_threshold <= 0 or self.stagnation_window <= 0 or self.max_iterations <= 0:
            raise ValueError("stopping criteria must all be positive")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    epsilon: float
    xi: float
    millis: float


@dataclass(frozen=True)
class CartogramState:
    """Map geometry at one iteration plus the errors measured on it."""

    mapmodel: MapModel
    iteration: int
    labels: LabelTexture = field(repr=False)
    pixel_counts: np.ndarray
    per_region_error: np.ndarray
    epsilon: float
    xi: float
    clamp_events: int = 0


@dataclass(frozen=True)
class RunResult:
    state: CartogramState
    trace: tuple[IterationRecord, ...]
    stop_reason: str  # converged | stagnation | max-iterations
    weights_px: np.ndarray
    background_mass: float

    def trace_csv(self) -> str:
        lines = ["iteration,epsilon,xi,millis"]
        for rec in self.trace:
            lines.append(f"{rec.iteration},{rec.epsilon:.9g},{rec.xi:.9g},{rec.millis:.3f}")
        return "\n".join(lines) + "\n"


def target_weights(mapmodel: MapModel, total_pixels_map: int) -> np.ndarray:
    """Desired per-region pixel areas: the statistic shares of the map pixels."""
    s = mapmodel.statistics()
    if (s <= 0).any():
        raise ValueError("statistics must be positive")
    return s / s.sum() * total_pixels_map


def cartographic_error_arrays(o: np.ndarray, w: np.ndarray):
    e = np.abs(o - w) / np.maximum(o, w)
    return e, float(e.mean()), float(e.max())


class CartogramEngine:
    """Owns one run's fixed data: resolution, target weights, background mass.

    ``bdv_mode`` 'fixed-mass' keeps the initial background mass constant and
    re-derives the background density from the current background pixel
    count each iteration (the domain mean then stays at its initial value);
    'rederive' recomputes the background density as the current map mean
    density each iteration instead.
    """

    def __init__(
        self,
        mapmodel: MapModel,
        criteria: StoppingCriteria | None = None,
        k: int = 10,
        bdv_multiplier: float = 1.0,
        background_mass: float | None = None,
        bdv_mode: str = "fixed-mass",
        apply_densify: bool = True,
    ):
        if bdv_mode not in ("fixed-mass", "rederive"):
            raise ValueError("bdv_mode must be 'fixed-mass' or 'rederive'")
        if bdv_multiplier <= 0:
            raise ValueError("bdv multiplier must be positive")
        self.criteria = criteria or StoppingCriteria()
        self.k = k
        self.n = 1 << k
        self.m = self.n * self.n
        self.bdv_multiplier = bdv_multiplier
        self.bdv_mode = bdv_mode

        if apply_densify:
            mapmodel = densify(mapmodel, DENSIFY_EDGE_PIXELS / self.n)
        self.initial_map = mapmodel
        self.statistics = mapmodel.statistics()
        self.total_statistic = float(self.statistics.sum())
        if self.total_statistic <= 0:
            raise NumericError("total statistic mass must be positive")

        labels0 = rasterize_labels(mapmodel, k)
        self.map_pixels0 = labels0.map_pixel_count()
        self.background_pixels0 = labels0.background_count()
        self.mean_density0 = self.total_statistic / self.map_pixels0
        if background_mass is not None:
            self.background_mass = float(background_mass)
        else:
            self.background_mass = (
                bdv_multiplier * self.mean_density0 * self.background_pixels0
            )
        # a region's desired pixel area is its share of the total mass
        total_mass = self.total_statistic + self.background_mass
        self.weights_px = self.statistics / total_mass * self.m
        self.base = base_mapping(self.n)
        self._labels0 = labels0

    def evaluate(self, mapmodel: MapModel, iteration: int, labels: LabelTexture | None = None) -> CartogramState:
        """Rasterize a map and measure its cartographic errors."""
        if labels is None:
            labels = rasterize_labels(mapmodel, self.k, check_collapse=False)
        counts = labels.pixel_counts()
        if (counts == 0).any():
            rid = labels.region_ids[int(np.argmin(counts))]
            raise RegionCollapsedError(rid, iteration)
        per_region, eps, xi = cartographic_error_arrays(counts.astype(float), self.weights_px)
        return CartogramState(
            mapmodel=mapmodel,
            iteration=iteration,
            labels=labels,
            pixel_counts=counts,
            per_region_error=per_region,
            epsilon=eps,
            xi=xi,
        )

    def current_bdv(self, labels: LabelTexture) -> float:
        n_bg = labels.background_count()
        if n_bg == 0:
            return self.mean_density0 * self.bdv_multiplier
        if self.bdv_mode == "fixed-mass":
            return self.background_mass / n_bg
        return self.bdv_multiplier * self.total_statistic / labels.map_pixel_count()

    def step(self, state: CartogramState) -> CartogramState:
        """One deformation: density -> integral images -> field -> advection."""
        bdv = self.current_bdv(state.labels)
        dens = build_density(self.statistics, state.labels, bdv)
        ii = integral_images(dens.d)
        fld = residual_field(ii, self.base)
        verts = state.mapmodel.vertex_array()
        moved, clamps = advect(verts, fld)
        new_map = state.mapmodel.with_vertex_array(moved)
        new_state = self.evaluate(new_map, state.iteration + 1)
        return replace(new_state, clamp_events=state.clamp_events + clamps)

    def run(self) -> RunResult:
        state = self.evaluate(self.initial_map, 0, labels=self._labels0)
        trace: list[IterationRecord] = []
        best_xi = np.inf
        best_iteration = 0
        best_vertices = self.initial_map.vertex_array().copy()
        stop_reason = "max-iterations"
        t_prev = time.perf_counter()
        while True:
            now = time.perf_counter()
            trace.append(
                IterationRecord(state.iteration, state.epsilon, state.xi, (now - t_prev) * 1e3)
            )
            t_prev = now
            if state.xi < best_xi:
                best_xi = state.xi
                best_iteration = state.iteration
                best_vertices = state.mapmodel.vertex_array().copy()
            if state.xi < self.criteria.error_threshold:
                stop_reason = "converged"
                break
            if state.iteration - best_iteration >= self.criteria.stagnation_window:
                stop_reason = "stagnation"
                state = self.evaluate(
                    state.mapmodel.with_vertex_array(best_vertices), best_iteration
                )
                break
            if state.iteration >= self.criteria.max_iterations:
                stop_reason = "max-iterations"
                break
            state = self.step(state)
        return RunResult(
            state=state,
            trace=tuple(trace),
            stop_reason=stop_reason,
            weights_px=self.weights_px,
            background_mass=self.background_mass,
        )


def run(
    mapmodel: MapModel,
    criteria: StoppingCriteria | None = None,
    bdv_multiplier: float = 1.0,
    k: int = 10,
    **kwargs,
) -> RunResult:
    """Run the full iterative algorithm on a normalized map."""
    engine = CartogramEngine(
        mapmodel, criteria=criteria, k=k, bdv_multiplier=bdv_multiplier, **kwargs
    )
    return engine.run()
