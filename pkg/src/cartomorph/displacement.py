"""Density-equalizing displacement: anchor mapping, residual field, advection.

The mapping sends (x, y) to a convex combination of eight border anchors
weighted by the integral-image channels.  Each mass sector is paired with
the anchor on the opposite side of the query point, so dense areas push
points away from themselves.  Subtracting the same mapping evaluated for a
constant texture makes uniform density an exact fixed point.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .integral import IntegralImageSet, integral_images


@dataclass(frozen=True)
class AnchorSet:
    """The four diagonal border anchors and four axis anchors of one point."""

    q1: tuple[float, float]
    q2: tuple[float, float]
    q3: tuple[float, float]
    q4: tuple[float, float]
    e1: tuple[float, float]
    e2: tuple[float, float]
    e3: tuple[float, float]
    e4: tuple[float, float]


def anchors(x: float, y: float) -> AnchorSet:
    """Border intersections of the two diagonals through (x, y), y-down.

    q1/q3 lie on the slope +1 line (q1 down-right, q3 up-left), q2/q4 on
    the slope -1 line (q2 up-right, q4 down-left).
    """
    if y < x:
        q1 = (1.0, 1.0 + y - x)
        q3 = (x - y, 0.0)
    else:
        q1 = (1.0 - y + x, 1.0)
        q3 = (0.0, y - x)
    if x + y < 1.0:
        q2 = (x + y, 0.0)
        q4 = (0.0, x + y)
    else:
        q2 = (1.0, x + y - 1.0)
        q4 = (x + y - 1.0, 1.0)
    return AnchorSet(q1, q2, q3, q4, (x, 1.0), (1.0, y), (x, 0.0), (0.0, y))


@functools.lru_cache(maxsize=8)
def _anchor_grids(n: int):
    """Anchor coordinates at every pixel center, as (n, n) component arrays."""
    c = (np.arange(n) + 0.5) / n
    x = c[None, :]
    y = c[:, None]
    below = y < x  # strictly below the main diagonal in y-down orientation
    q1x = np.where(below, 1.0, 1.0 - y + x)
    q1y = np.where(below, 1.0 + y - x, 1.0)
    q3x = np.where(below, x - y, 0.0)
    q3y = np.where(below, 0.0, y - x)
    near = x + y < 1.0
    q2x = np.where(near, x + y, 1.0)
    q2y = np.where(near, 0.0, x + y - 1.0)
    q4x = np.where(near, 0.0, x + y - 1.0)
    q4y = np.where(near, x + y, 1.0)
    xb = np.broadcast_to(x, (n, n))
    yb = np.broadcast_to(y, (n, n))
    return (q1x, q1y, q2x, q2y, q3x, q3y, q4x, q4y, xb, yb)


def _corner_lattice(ii: IntegralImageSet):
    """Straight channels on the (n+1)^2 corner lattice, where they are exact.

    The quadrant sum with indices <= i is the exact integral of the texture
    over the rectangle ending at corner (i+1)/n, so putting channel nodes on
    pixel corners (with an exact zero virtual row/column) removes the
    half-pixel bias a pixel-center convention would introduce.
    """
    n = ii.size
    ext = np.zeros((n + 1, n + 1))
    ext[1:, 1:] = ii.alpha
    col_full = ext[-1:, :]
    row_full = ext[:, -1:]
    total = ii.total
    beta_ext = col_full - ext
    delta_ext = row_full - ext
    gamma_ext = total - col_full - row_full + ext
    return ext, beta_ext, gamma_ext, delta_ext


def _corner_avg(ext: np.ndarray) -> np.ndarray:
    """Corner-lattice channel bilinearly evaluated at all pixel centers."""
    return 0.25 * (ext[:-1, :-1] + ext[:-1, 1:] + ext[1:, :-1] + ext[1:, 1:])


def mapping_grid(ii: IntegralImageSet) -> np.ndarray:
    """Anchor-combination target position at every pixel center, (n, n, 2).

    Straight channels are sampled through the corner lattice; tilted
    channels live naturally on pixel centers and are used directly.  The
    three non-alpha straight channels come from the same corner average via
    their linear relation to alpha, the column/row totals and C.
    """
    if ii.total <= 0:
        raise NumericError("mapping undefined for zero total density")
    n = ii.size
    q1x, q1y, q2x, q2y, q3x, q3y, q4x, q4y, x, y = _anchor_grids(n)
    inv = 1.0 / (2.0 * ii.total)
    total = ii.total

    ext = np.zeros((n + 1, n + 1))
    ext[1:, 1:] = ii.alpha
    a = 0.25 * (ext[:-1, :-1] + ext[:-1, 1:] + ext[1:, :-1] + ext[1:, 1:])
    col_full = ext[-1, :]
    row_full = ext[:, -1]
    col_avg = (0.5 * (col_full[:-1] + col_full[1:]))[None, :]
    row_avg = (0.5 * (row_full[:-1] + row_full[1:]))[:, None]
    b = col_avg - a
    d = row_avg - a
    g = total - col_avg - row_avg + a

    at, bt, gt, dt = ii.tilted_channels()
    tx = (a * q1x + b * q2x + g * q3x + d * q4x + at * x + bt + gt * x) * inv
    ty = (a * q1y + b * q2y + g * q3y + d * q4y + at + bt * y + dt * y) * inv
    return np.stack([tx, ty], axis=-1)


def _sample_lattice(channel: np.ndarray, gx: float, gy: float) -> float:
    """Bilinear sample of a channel given fractional lattice coordinates."""
    n_nodes = channel.shape[0]
    i0 = int(np.clip(np.floor(gx), 0, n_nodes - 2))
    j0 = int(np.clip(np.floor(gy), 0, n_nodes - 2))
    fx = float(np.clip(gx - i0, 0.0, 1.0))
    fy = float(np.clip(gy - j0, 0.0, 1.0))
    c = channel
    return (
        c[j0, i0] * (1 - fx) * (1 - fy)
        + c[j0, i0 + 1] * fx * (1 - fy)
        + c[j0 + 1, i0] * (1 - fx) * fy
        + c[j0 + 1, i0 + 1] * fx * fy
    )


def mapping_point(x: float, y: float, ii: IntegralImageSet) -> np.ndarray:
    """The anchor mapping at one continuous location.

    Straight channels interpolate on the corner lattice, tilted channels
    between pixel centers; anchors are evaluated exactly at (x, y).
    """
    if ii.total <= 0:
        raise NumericError("mapping undefined for zero total density")
    n = ii.size
    an = anchors(x, y)
    straight = [
        _sample_lattice(c, x * n, y * n) for c in _corner_lattice(ii)
    ]
    tilted = [
        _sample_lattice(c, x * n - 0.5, y * n - 0.5) for c in ii.tilted_channels()
    ]
    points = [an.q1, an.q2, an.q3, an.q4, an.e1, an.e2, an.e3, an.e4]
    acc = np.zeros(2)
    for w, p in zip(straight + tilted, points):
        acc += w * np.asarray(p)
    return acc / (2.0 * ii.total)


@functools.lru_cache(maxsize=8)
def base_mapping(n: int) -> np.ndarray:
    """The mapping of a constant texture, cached per resolution.

    Computed once per grid size and shared across iterations and time steps;
    the constant's value is irrelevant because the mapping is scale invariant.
    """
    ii = integral_images(np.ones((n, n)))
    grid = mapping_grid(ii)
    grid.setflags(write=False)
    return grid


@dataclass
class DisplacementField:
    """Per-pixel displacement u = t(d) - t(d0) sampled at pixel centers."""

    size: int
    u: np.ndarray  # (n, n, 2)
    base: np.ndarray = field(repr=False, default=None)

    def max_magnitude(self) -> float:
        return float(np.hypot(self.u[..., 0], self.u[..., 1]).max())


def residual_field(ii_d: IntegralImageSet, base: np.ndarray | None = None) -> DisplacementField:
    """Displacement field t(x,y;d) - t(x,y;d0) at every pixel center."""
    n = ii_d.size
    if base is None:
        base = base_mapping(n)
    if base.shape[0] != n:
        raise ValueError(f"base grid size {base.shape[0]} does not match texture size {n}")
    u = mapping_grid(ii_d) - base
    return DisplacementField(size=n, u=u, base=base)


def sample_bilinear(u: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Bilinear sample of a (n, n, 2) field at (N, 2) points in [0, 1]^2."""
    n = u.shape[0]
    g = np.asarray(points, dtype=float) * n - 0.5
    i0 = np.clip(np.floor(g[:, 0]).astype(np.int64), 0, n - 2)
    j0 = np.clip(np.floor(g[:, 1]).astype(np.int64), 0, n - 2)
    fx = np.clip(g[:, 0] - i0, 0.0, 1.0)[:, None]
    fy = np.clip(g[:, 1] - j0, 0.0, 1.0)[:, None]
    u00 = u[j0, i0]
    u10 = u[j0, i0 + 1]
    u01 = u[j0 + 1, i0]
    u11 = u[j0 + 1, i0 + 1]
    return (
        u00 * (1 - fx) * (1 - fy)
        + u10 * fx * (1 - fy)
        + u01 * (1 - fx) * fy
        + u11 * fx * fy
    )


def advect(vertices: np.ndarray, fld: DisplacementField) -> tuple[np.ndarray, int]:
    """Move vertices by the bilinearly sampled displacement, clamped to [0,1]^2.

    Returns the new positions and the number of clamped coordinates.
    """
    verts = np.asarray(vertices, dtype=float)
    moved = verts + sample_bilinear(fld.u, verts)
    clamped = np.clip(moved, 0.0, 1.0)
    clamp_count = int(np.count_nonzero(clamped != moved))
    return clamped, clamp_count
