"""Independent brute-force reference implementations used by the test suite.

Everything here is deliberately written as direct sums / exhaustive loops so
it stays independent of the fast code paths it is used to check.
"""

import numpy as np


def brute_straight(d: np.ndarray):
    """Quadrant sums by direct double summation.

    ``d`` is indexed [j, i] (row = y, col = x).  Returns (alpha, beta,
    gamma, delta, total) where alpha(i,j) sums i' <= i, j' <= j and so on.
    """
    h, w = d.shape
    alpha = np.zeros_like(d)
    beta = np.zeros_like(d)
    gamma = np.zeros_like(d)
    delta = np.zeros_like(d)
    for j in range(h):
        for i in range(w):
            alpha[j, i] = d[: j + 1, : i + 1].sum()
            beta[j, i] = d[j + 1 :, : i + 1].sum()
            gamma[j, i] = d[j + 1 :, i + 1 :].sum()
            delta[j, i] = d[: j + 1, i + 1 :].sum()
    return alpha, beta, gamma, delta, d.sum()


def tilted_sector_masks(h: int, w: int, i: int, j: int):
    """Boolean masks of the four diagonal sectors around pixel (i, j).

    Sector rule: a pixel at offset (di, dj) is
      top    if dj < -|di|,   bottom if dj > |di|,
      left   if di < -|dj|,   right  if di > |dj|;
    diagonal ties (|di| == |dj| != 0) go to top/bottom when di == dj
    (by sign of dj) and to left/right when di == -dj (by sign of di);
    the pixel itself counts as top.
    """
    jj, ii = np.mgrid[0:h, 0:w]
    di = ii - i
    dj = jj - j
    top = dj < -np.abs(di)
    bottom = dj > np.abs(di)
    left = di < -np.abs(dj)
    right = di > np.abs(dj)
    main_diag = (di == dj) & (di != 0)
    anti_diag = (di == -dj) & (di != 0)
    top |= main_diag & (dj < 0)
    bottom |= main_diag & (dj > 0)
    left |= anti_diag & (di < 0)
    right |= anti_diag & (di > 0)
    top |= (di == 0) & (dj == 0)
    return top, left, bottom, right


def brute_tilted(d: np.ndarray):
    """Tilted sector sums (alpha_t, beta_t, gamma_t, delta_t) by brute force."""
    h, w = d.shape
    at = np.zeros_like(d)
    bt = np.zeros_like(d)
    gt = np.zeros_like(d)
    dt = np.zeros_like(d)
    for j in range(h):
        for i in range(w):
            top, left, bottom, right = tilted_sector_masks(h, w, i, j)
            at[j, i] = d[top].sum()
            bt[j, i] = d[left].sum()
            gt[j, i] = d[bottom].sum()
            dt[j, i] = d[right].sum()
    return at, bt, gt, dt


def brute_anchor_points(x: float, y: float):
    """The four diagonal border anchors of (x, y), y-down orientation."""
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
    return np.array([q1, q2, q3, q4])


def brute_corner_quadrants(d: np.ndarray, ii: int, jj: int):
    """Exact quadrant integrals split at pixel corner (ii/n, jj/n)."""
    a = d[:jj, :ii].sum()
    b = d[jj:, :ii].sum()
    g = d[jj:, ii:].sum()
    dl = d[:jj, ii:].sum()
    return np.array([a, b, g, dl])


def brute_mapping_grid(d: np.ndarray):
    """Anchor-combination map evaluated at every pixel center by brute force.

    Straight channels are the average of the four exact corner-quadrant
    integrals around the pixel (the corner-lattice convention); tilted
    channels are the discrete sector sums at the pixel itself.
    Returns an (n, n, 2) array of target positions.
    """
    h, w = d.shape
    assert h == w
    n = h
    total = d.sum()
    at, bt, gt, dt = brute_tilted(d)
    out = np.zeros((n, n, 2))
    for j in range(n):
        for i in range(n):
            x = (i + 0.5) / n
            y = (j + 0.5) / n
            q = brute_anchor_points(x, y)
            axis = np.array([[x, 1.0], [1.0, y], [x, 0.0], [0.0, y]])
            straight_w = 0.25 * (
                brute_corner_quadrants(d, i, j)
                + brute_corner_quadrants(d, i + 1, j)
                + brute_corner_quadrants(d, i, j + 1)
                + brute_corner_quadrants(d, i + 1, j + 1)
            )
            tilted_w = np.array([at[j, i], bt[j, i], gt[j, i], dt[j, i]])
            out[j, i] = (straight_w @ q + tilted_w @ axis) / (2.0 * total)
    return out


def exhaustive_hamming_min(mask_a: np.ndarray, mask_b: np.ndarray, window: int):
    """Minimum normalized symmetric difference over all integer shifts.

    Shifts mask_b by every (dx, dy) with |dx|, |dy| <= window (zero fill,
    no wraparound) and returns the smallest |A xor B| / |A or B|.
    """
    h, w = mask_a.shape
    a = mask_a.astype(bool)
    best = None
    for dy in range(-window, window + 1):
        for dx in range(-window, window + 1):
            shifted = np.zeros_like(a)
            ys = slice(max(0, dy), min(h, h + dy))
            xs = slice(max(0, dx), min(w, w + dx))
            ys_src = slice(max(0, -dy), min(h, h - dy))
            xs_src = slice(max(0, -dx), min(w, w - dx))
            shifted[ys, xs] = mask_b.astype(bool)[ys_src, xs_src]
            union = np.logical_or(a, shifted).sum()
            if union == 0:
                continue
            sym = np.logical_xor(a, shifted).sum()
            value = sym / union
            if best is None or value < best:
                best = value
    return best
