"""Label and density textures on the 2^k x 2^k pixel grid.

Rasterization fills a region at pixel (i, j) when the pixel center
((i+0.5)/n, (j+0.5)/n) lies inside the region's rings under the even-odd
rule.  Crossing comparisons are half-open (a center exactly on a span start
is inside, on a span end outside) and regions are painted in ascending id
order with first-write-wins, so ties on shared edges go to the lower id and
every pixel ends up with exactly one label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RasterizationError
from .geomodel import MapModel

BACKGROUND = -1


def _crossing_indices(ring: np.ndarray, n: int):
    """Even-odd crossing toggle positions (j, i0) for one ring's edges.

    A toggle at (j, i0) flips the inside parity of pixels i >= i0 on
    scanline j; i0 is the first pixel whose center lies at or right of the
    crossing, so spans are half-open (left edge inside, right edge outside).
    """
    p0 = ring
    p1 = np.roll(ring, -1, axis=0)
    y0 = p0[:, 1] * n
    y1 = p1[:, 1] * n
    keep = y0 != y1
    if not keep.any():
        return None
    x0 = p0[keep, 0] * n
    x1 = p1[keep, 0] * n
    y0 = y0[keep]
    y1 = y1[keep]

    ylo = np.minimum(y0, y1)
    yhi = np.maximum(y0, y1)
    # scanline j has center j + 0.5; an edge covers ylo <= center < yhi
    jlo = np.clip(np.ceil(ylo - 0.5).astype(np.int64), 0, n)
    jhi = np.clip(np.ceil(yhi - 0.5).astype(np.int64), 0, n)
    counts = jhi - jlo
    valid = counts > 0
    if not valid.any():
        return None
    x0, x1, y0, y1, jlo, counts = (a[valid] for a in (x0, x1, y0, y1, jlo, counts))

    total = int(counts.sum())
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    offsets = np.arange(total) - np.repeat(starts, counts)
    j = np.repeat(jlo, counts) + offsets
    yc = j + 0.5
    slope = (x1 - x0) / (y1 - y0)
    xc = np.repeat(x0, counts) + (yc - np.repeat(y0, counts)) * np.repeat(slope, counts)
    i0 = np.clip(np.ceil(xc - 0.5).astype(np.int64), 0, n)
    return j, i0


def _submask(rings, n: int):
    """Even-odd fill restricted to the rings' bounding rows/columns.

    Returns (j_off, i_off, mask) where mask covers rows j_off.. and columns
    i_off.. of the full grid.
    """
    pts = np.vstack(rings)
    j_off = int(np.clip(np.ceil(pts[:, 1].min() * n - 0.5), 0, n))
    j_end = int(np.clip(np.ceil(pts[:, 1].max() * n - 0.5), 0, n))
    i_off = int(np.clip(np.ceil(pts[:, 0].min() * n - 0.5), 0, n))
    i_end = int(np.clip(np.ceil(pts[:, 0].max() * n - 0.5), 0, n))
    rows = max(j_end - j_off, 0)
    cols = max(i_end - i_off, 0)
    if rows == 0 or cols == 0:
        return j_off, i_off, np.zeros((rows, cols), dtype=bool)
    # +1 column absorbs toggles at or right of the crop edge
    width = cols + 1
    toggles = np.zeros(rows * width, dtype=np.int64)
    for ring in rings:
        res = _crossing_indices(np.asarray(ring, dtype=float), n)
        if res is None:
            continue
        j, i0 = res
        toggles += np.bincount(
            (j - j_off) * width + np.minimum(i0 - i_off, cols), minlength=rows * width
        )
    parity = np.cumsum(toggles.reshape(rows, width)[:, :cols], axis=1) & 1
    return j_off, i_off, parity.astype(bool)


def region_mask(rings: tuple[np.ndarray, ...] | list[np.ndarray], n: int) -> np.ndarray:
    """Even-odd fill of a set of rings on an n x n grid (holes cancel)."""
    j_off, i_off, sub = _submask(rings, n)
    mask = np.zeros((n, n), dtype=bool)
    mask[j_off : j_off + sub.shape[0], i_off : i_off + sub.shape[1]] = sub
    return mask


@dataclass(frozen=True)
class LabelTexture:
    """Per-pixel region index; BACKGROUND (-1) marks unclaimed pixels."""

    size: int
    labels: np.ndarray  # (n, n) int32, indexed [j, i]
    region_ids: tuple[str, ...]

    def pixel_counts(self) -> np.ndarray:
        flat = self.labels[self.labels >= 0]
        return np.bincount(flat, minlength=len(self.region_ids)).astype(np.int64)

    def background_count(self) -> int:
        return int((self.labels == BACKGROUND).sum())

    def map_pixel_count(self) -> int:
        return self.size * self.size - self.background_count()


@dataclass(frozen=True)
class DensityTexture:
    """Piecewise-constant density d with its domain mean d0 and the applied BDV."""

    size: int
    d: np.ndarray  # (n, n) float64
    d0: float
    bdv: float
    pixel_counts: np.ndarray

    @property
    def total(self) -> float:
        return float(self.d.sum())


def rasterize_labels(mapmodel: MapModel, k: int, check_collapse: bool = True) -> LabelTexture:
    """Rasterize all regions at resolution 2^k; 4 <= k <= 13."""
    if not (4 <= k <= 13):
        raise ValueError("texture exponent k must be in [4, 13]")
    n = 1 << k
    labels = np.full((n, n), BACKGROUND, dtype=np.int32)
    order = sorted(range(len(mapmodel.regions)), key=lambda i: mapmodel.regions[i].region_id)
    for idx in order:
        j_off, i_off, sub = _submask(mapmodel.regions[idx].rings, n)
        view = labels[j_off : j_off + sub.shape[0], i_off : i_off + sub.shape[1]]
        np.copyto(view, idx, where=sub & (view == BACKGROUND))
    tex = LabelTexture(size=n, labels=labels, region_ids=tuple(mapmodel.region_ids()))
    if check_collapse:
        counts = tex.pixel_counts()
        empty = [rid for rid, c in zip(tex.region_ids, counts) if c == 0]
        if empty:
            raise RasterizationError(
                f"zero-pixel region(s) at resolution {n}x{n}: {empty} (resolution too low)"
            )
    return tex


def default_bdv(statistics: np.ndarray, labels: LabelTexture) -> float:
    """Mean density over the map pixels: total statistic / map pixel count."""
    n_map = labels.map_pixel_count()
    if n_map == 0:
        raise RasterizationError("map rasterized to zero pixels")
    return float(np.sum(statistics)) / n_map


def build_density(statistics: np.ndarray, labels: LabelTexture, bdv: float) -> DensityTexture:
    """Per-pixel density s(v)/o_px(v) inside regions, ``bdv`` on the background."""
    if bdv <= 0:
        raise ValueError("bdv must be positive")
    counts = labels.pixel_counts()
    if (counts == 0).any():
        raise RasterizationError("cannot build density with zero-pixel regions")
    per_region = np.asarray(statistics, dtype=float) / counts
    lookup = np.concatenate([per_region, [float(bdv)]])
    idx = np.where(labels.labels >= 0, labels.labels, len(per_region))
    d = lookup[idx]
    m = labels.size * labels.size
    return DensityTexture(
        size=labels.size,
        d=d,
        d0=float(d.sum()) / m,
        bdv=float(bdv),
        pixel_counts=counts,
    )


def write_pgm16(path, array: np.ndarray) -> None:
    """16-bit binary PGM dump, values min-max scaled to [0, 65535]."""
    a = np.asarray(array, dtype=float)
    lo, hi = float(a.min()), float(a.max())
    scaled = np.zeros_like(a) if hi == lo else (a - lo) / (hi - lo)
    pix = (scaled * 65535).round().astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.shape[1]} {a.shape[0]}\n65535\n".encode())
        fh.write(pix.tobytes())


def write_raw_f32(path, array: np.ndarray) -> None:
    """Raw float32 little-endian row-major dump (no header)."""
    np.asarray(array, dtype="<f4").tofile(path)


def write_raw_f64(path, array: np.ndarray) -> None:
    """Raw float64 little-endian row-major dump (no header)."""
    np.asarray(array, dtype="<f8").tofile(path)
