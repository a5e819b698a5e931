"""Quality measures for (original map, cartogram) pairs.

Statistical accuracy: average/maximum cartographic error.  Geographic
faithfulness: topology distortion (Jaccard complement of adjacency sets),
per-region shape distortion (normalized symmetric difference minimized over
integer-pixel translations) and relative position error (mean absolute
rotation of pairwise barycenter vectors, normalized by pi).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import NumericError, RasterizationError
from .geomodel import MapModel, detect_adjacencies
from .raster import region_mask

log = logging.getLogger(__name__)

DEFAULT_HAMMING_K = 7  # 128 x 128 shape rasters
DEFAULT_ADJACENCY_EPSILON = 0.5 / 1024


def cartographic_errors(o: np.ndarray, w: np.ndarray):
    """Per-region |o - w| / max(o, w), its mean (epsilon) and max (xi)."""
    o = np.asarray(o, dtype=float)
    w = np.asarray(w, dtype=float)
    if (o <= 0).any() or (w <= 0).any():
        raise NumericError("cartographic error needs positive actual and desired areas")
    per_region = np.abs(o - w) / np.maximum(o, w)
    return float(per_region.mean()), float(per_region.max()), per_region


def topology_distortion(edges_map: frozenset | set, edges_carto: frozenset | set) -> float:
    """1 - Jaccard similarity of the two adjacency sets; 0 when both empty."""
    em = {tuple(sorted(e)) for e in edges_map}
    ec = {tuple(sorted(e)) for e in edges_carto}
    union = em | ec
    if not union:
        return 0.0
    return 1.0 - len(em & ec) / len(union)


def _rescaled_rings(rings, target_area: float = 1.0):
    """Uniformly rescale a ring set about its centroid to the target area."""
    from .geomodel import ring_centroid, shoelace_area

    areas = [shoelace_area(r) for r in rings]
    total = sum(areas)
    if total <= 0:
        raise NumericError("region with non-positive area")
    centroid = sum(a * ring_centroid(r) for a, r in zip(areas, rings)) / total
    factor = np.sqrt(target_area / total)
    return [(r - centroid) * factor for r in rings]


def _raster_pair(rings_a, rings_b, raster_k: int):
    """Rasterize two ring sets on a shared square grid; returns boolean masks."""
    n = 1 << raster_k
    pts = np.vstack([np.vstack(rings_a), np.vstack(rings_b)])
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    center = 0.5 * (lo + hi)
    half = 0.55 * float(max(hi - lo)) + 1e-12
    corner = center - half

    def to_grid(rings):
        return [(r - corner) / (2 * half) for r in rings]

    mask_a = region_mask(to_grid(rings_a), n)
    mask_b = region_mask(to_grid(rings_b), n)
    if not mask_a.any() or not mask_b.any():
        raise RasterizationError("shape rasterized to zero pixels in Hamming grid")
    return mask_a, mask_b


def hamming_distance(rings_m, rings_c, raster_k: int = DEFAULT_HAMMING_K, rescale: bool = True) -> float:
    """Normalized symmetric difference of two shapes, minimized over shifts.

    Both shapes are rasterized on one grid; the overlap for every integer
    translation comes from a full FFT cross-correlation, and the minimum is
    taken over shifts within +/- each axis' bounding-box extent.  With
    ``rescale`` both shapes are first scaled about their centroids to equal
    area so the measure ignores the area change a cartogram induces.
    """
    if rescale:
        rings_m = _rescaled_rings(rings_m)
        rings_c = _rescaled_rings(rings_c)
    mask_m, mask_c = _raster_pair(rings_m, rings_c, raster_k)
    a = mask_m.astype(np.float64)
    b = mask_c.astype(np.float64)
    na = float(a.sum())
    nb = float(b.sum())
    corr = fftconvolve(a, b[::-1, ::-1], mode="full")
    inter = np.round(corr).clip(0.0, min(na, nb))

    n = a.shape[0]
    # search window: the bounding-box extent of either shape, per axis
    def extent(mask):
        ys, xs = np.nonzero(mask)
        return xs.max() - xs.min() + 1, ys.max() - ys.min() + 1

    wxa, wya = extent(mask_m)
    wxb, wyb = extent(mask_c)
    wx = max(wxa, wxb)
    wy = max(wya, wyb)
    shifts = np.arange(2 * n - 1) - (n - 1)
    in_window = (np.abs(shifts)[:, None] <= wy) & (np.abs(shifts)[None, :] <= wx)
    best_inter = float(inter[in_window].max())
    union = na + nb - best_inter
    if union <= 0:
        return 0.0
    return (na + nb - 2.0 * best_inter) / union


def shape_distortion(
    mapmodel: MapModel,
    carto: MapModel,
    raster_k: int = DEFAULT_HAMMING_K,
    rescale: bool = True,
):
    """Per-region Hamming shape distortion plus (average, maximum)."""
    _check_same_regions(mapmodel, carto)
    values = np.array(
        [
            hamming_distance(rm.rings, rc.rings, raster_k=raster_k, rescale=rescale)
            for rm, rc in zip(mapmodel.regions, carto.regions)
        ]
    )
    return values, float(values.mean()), float(values.max())


def relative_position_error(mapmodel: MapModel, carto: MapModel) -> float:
    """Mean |angle change| of pairwise barycenter vectors, normalized by pi."""
    _check_same_regions(mapmodel, carto)
    if len(mapmodel.regions) < 2:
        raise NumericError("relative position error needs at least two regions")
    bm = np.array([r.centroid() for r in mapmodel.regions])
    bc = np.array([r.centroid() for r in carto.regions])
    count = len(mapmodel.regions)
    total = 0.0
    degenerate = 0
    for u in range(count):
        for v in range(count):
            if u == v:
                continue
            vm = bm[v] - bm[u]
            vc = bc[v] - bc[u]
            if np.allclose(vm, 0) or np.allclose(vc, 0):
                degenerate += 1
                continue
            cross = vm[0] * vc[1] - vm[1] * vc[0]
            dot = vm[0] * vc[0] + vm[1] * vc[1]
            total += abs(np.arctan2(cross, dot))
    if degenerate:
        log.info("relative_position_error: %d degenerate barycenter pairs contributed 0", degenerate)
    return total / (np.pi * count * (count - 1))


def _check_same_regions(a: MapModel, b: MapModel) -> None:
    if a.region_ids() != b.region_ids():
        raise ValueError("map and cartogram must list the same regions in the same order")


@dataclass
class QualityReport:
    epsilon: float
    xi: float
    tau: float
    hamming_avg: float
    hamming_max: float
    position_error: float
    per_region: dict[str, dict[str, float]] = field(default_factory=dict)
    wall_ms: float | None = None

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "xi": self.xi,
            "tau": self.tau,
            "hamming_avg": self.hamming_avg,
            "hamming_max": self.hamming_max,
            "position_error": self.position_error,
            "per_region": self.per_region,
            "wall_ms": self.wall_ms,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "QualityReport":
        return cls(**data)

    def to_csv(self) -> str:
        lines = ["region,cartographic_error,shape_distortion"]
        for rid, vals in self.per_region.items():
            lines.append(
                f"{rid},{vals['cartographic_error']:.9g},{vals['shape_distortion']:.9g}"
            )
        lines.append(
            f"_aggregate,epsilon={self.epsilon:.9g};xi={self.xi:.9g};tau={self.tau:.9g},"
            f"avg={self.hamming_avg:.9g};max={self.hamming_max:.9g};R={self.position_error:.9g}"
        )
        return "\n".join(lines) + "\n"


def full_report(
    mapmodel: MapModel,
    carto: MapModel,
    weights: np.ndarray | None = None,
    raster_k: int = DEFAULT_HAMMING_K,
    adjacency_epsilon: float = DEFAULT_ADJACENCY_EPSILON,
    rescale_shapes: bool = True,
    wall_ms: float | None = None,
) -> QualityReport:
    """All six measures for a map/cartogram pair.

    Areas are shoelace areas in normalized units.  ``weights`` are desired
    areas in the same units; when omitted, each region's target is its
    statistic share of the cartogram's total map area.
    """
    _check_same_regions(mapmodel, carto)
    o = np.array([r.area() for r in carto.regions])
    if weights is None:
        s = mapmodel.statistics()
        weights = s / s.sum() * o.sum()
    eps, xi, per_cart = cartographic_errors(o, weights)

    edges_map = mapmodel.adjacency or detect_adjacencies(mapmodel, adjacency_epsilon)
    edges_carto = detect_adjacencies(carto, adjacency_epsilon)
    tau = topology_distortion(edges_map, edges_carto)

    per_shape, ham_avg, ham_max = shape_distortion(
        mapmodel, carto, raster_k=raster_k, rescale=rescale_shapes
    )
    r = relative_position_error(mapmodel, carto)

    per_region = {
        rid: {
            "cartographic_error": float(ce),
            "shape_distortion": float(sd),
        }
        for rid, ce, sd in zip(mapmodel.region_ids(), per_cart, per_shape)
    }
    return QualityReport(
        epsilon=eps,
        xi=xi,
        tau=tau,
        hamming_avg=ham_avg,
        hamming_max=ham_max,
        position_error=r,
        per_region=per_region,
        wall_ms=wall_ms,
    )
