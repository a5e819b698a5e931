"""Straight and 45-degree-tilted integral images in O(m).

Arrays are indexed [j, i] with i the x (column) and j the y (row) index,
y growing downward.  The four straight channels sum the axis-aligned
quadrants around each pixel; the four tilted channels sum the diagonal
sectors (top, left, bottom, right).  Either family partitions the texture,
so its channels sum to the total mass C at every pixel.

Tilted sector membership for an offset (di, dj) from the query pixel:
strictly inside a sector when the matching strict inequality holds
(top: dj < -|di|, etc.); diagonal ties with di == dj go to top/bottom by
the sign of dj, ties with di == -dj go to left/right by the sign of di,
and the query pixel itself counts as top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class IntegralImageSet:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    alpha_t: np.ndarray
    beta_t: np.ndarray
    gamma_t: np.ndarray
    delta_t: np.ndarray
    total: float

    @property
    def size(self) -> int:
        return self.alpha.shape[0]

    def straight_channels(self) -> tuple[np.ndarray, ...]:
        return (self.alpha, self.beta, self.gamma, self.delta)

    def tilted_channels(self) -> tuple[np.ndarray, ...]:
        return (self.alpha_t, self.beta_t, self.gamma_t, self.delta_t)


def straight_inims(d: np.ndarray):
    """The four quadrant-sum channels plus the total mass.

    alpha(i,j) sums i' <= i, j' <= j; beta sums i' <= i, j' > j;
    gamma sums i' > i, j' > j; delta sums i' > i, j' <= j.
    Two cumulative-sum passes, O(m).
    """
    d = np.asarray(d, dtype=np.float64)
    alpha = d.cumsum(axis=0).cumsum(axis=1)
    col_total = alpha[-1:, :]  # all rows, columns <= i
    row_total = alpha[:, -1:]  # all columns, rows <= j
    total = float(alpha[-1, -1])
    beta = col_total - alpha
    delta = row_total - alpha
    gamma = total - col_total - row_total + alpha
    return alpha, beta, gamma, delta, total


@njit(cache=True)
def _closed_top_cone(d: np.ndarray) -> np.ndarray:
    """Sum over {(i', j'): j' <= j, |i' - i| <= j - j'} for every pixel.

    Rolling three-row recurrence on a band padded by the texture height, so
    cones flaring past the texture edge stay exact with zero fill.  Only the
    active band [pad-j-1, pad+w+j+1) is touched per row; cells outside were
    never written and stay zero.
    """
    h, w = d.shape
    pad = h
    width = w + 2 * pad
    out = np.empty((h, w))
    prev2 = np.zeros(width)
    prev1 = np.zeros(width)
    cur = np.zeros(width)
    for j in range(h):
        if j == 0:
            for i in range(w):
                cur[pad + i] = d[0, i]
        else:
            lo = max(1, pad - j - 1)
            hi = min(width - 1, pad + w + j + 1)
            for c in range(lo, hi):
                v = prev1[c - 1] + prev1[c + 1] - prev2[c]
                i = c - pad
                if 0 <= i < w:
                    v += d[j, i] + d[j - 1, i]
                cur[c] = v
        out[j] = cur[pad : pad + w]
        tmp = prev2
        prev2 = prev1
        prev1 = cur
        cur = tmp
    return out


@njit(cache=True)
def _diag_up_left(d: np.ndarray) -> np.ndarray:
    """Half-line sums d(i,j) + d(i-1,j-1) + ... including the anchor."""
    h, w = d.shape
    out = np.empty((h, w))
    out[0] = d[0]
    for j in range(1, h):
        out[j, 0] = d[j, 0]
        for i in range(1, w):
            out[j, i] = d[j, i] + out[j - 1, i - 1]
    return out


@njit(cache=True)
def _diag_up_right(d: np.ndarray) -> np.ndarray:
    """Half-line sums d(i,j) + d(i+1,j-1) + ... including the anchor."""
    h, w = d.shape
    out = np.empty((h, w))
    out[0] = d[0]
    for j in range(1, h):
        out[j, w - 1] = d[j, w - 1]
        for i in range(w - 1):
            out[j, i] = d[j, i] + out[j - 1, i + 1]
    return out


def tilted_inims(d: np.ndarray):
    """The four diagonal-sector channels (top, left, bottom, right).

    Each closed cone obeys the recurrence
    cone(i,j) = cone(i-1,j-1) + cone(i+1,j-1) - cone(i,j-2) + d(i,j) + d(i,j-1);
    sector channels subtract the diagonal half-lines claimed by the
    neighboring sectors under the tie rule.
    """
    d = np.ascontiguousarray(d, dtype=np.float64)
    flip_v = np.ascontiguousarray(d[::-1])

    alpha_t = _closed_top_cone(d)
    alpha_t -= _diag_up_right(d)
    alpha_t += d

    beta_t = _closed_top_cone(np.ascontiguousarray(d.T)).T.copy()
    beta_t -= _diag_up_left(d)

    gamma_t = _closed_top_cone(flip_v)[::-1].copy()
    gamma_t -= _diag_up_left(flip_v)[::-1]

    delta_t = _closed_top_cone(np.ascontiguousarray(d[:, ::-1].T)).T[:, ::-1].copy()
    delta_t -= _diag_up_right(flip_v)[::-1]

    return alpha_t, beta_t, gamma_t, delta_t


def integral_images(d: np.ndarray) -> IntegralImageSet:
    """All eight channels of a texture plus its total mass."""
    alpha, beta, gamma, delta, total = straight_inims(d)
    alpha_t, beta_t, gamma_t, delta_t = tilted_inims(d)
    return IntegralImageSet(
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        delta=delta,
        alpha_t=alpha_t,
        beta_t=beta_t,
        gamma_t=gamma_t,
        delta_t=delta_t,
        total=total,
    )
