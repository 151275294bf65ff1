"""Numeric inner loops shared by the toolbox, generator and navigation.

Two interchangeable implementations live here: numba ``@njit`` loops (the
default) and vectorized numpy fallbacks. Set ``GROUND3D_NO_NUMBA=1`` to
force the numpy path; the public names bind to whichever path is active,
and both are always importable (``*_np`` suffix for numpy) so tests and
the benchmark can compare them. Both paths evaluate the same expressions
in the same order, so results are bit-identical.

Grid kernels return a flat row-major cell index (``row * width + col``) or
-1 when no cell qualifies; distance ties resolve to the first cell in
row-major order, i.e. lowest ``(row, col)``.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("GROUND3D_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    _HAVE_NUMBA = False

USING_NUMBA = _HAVE_NUMBA and not _DISABLE


# ---------------------------------------------------------------------------
# numpy implementations


def box_gap_distances_np(centers, extents, acenter, aextent):
    """Surface distance from each AABB to the anchor AABB.

    Per-axis gap ``max(0, |dc| - (e + ae))``, Euclidean norm over axes;
    when the boxes overlap or touch (all gaps zero) the distance falls
    back to the center-to-center distance.
    """
    dc = np.abs(centers - acenter)
    gaps = np.maximum(0.0, dc - (extents + aextent))
    surface = np.sqrt(np.sum(gaps * gaps, axis=1))
    center = np.sqrt(np.sum((centers - acenter) ** 2, axis=1))
    return np.where(surface > 0.0, surface, center)


def between_scores_np(centers, a1, a2, alpha):
    """Score = -(lateral distance to the anchor segment + alpha * overshoot).

    Overshoot is the longitudinal distance past the segment half-length,
    measured from the segment midpoint. Degenerate anchors (same center)
    reduce to plain negative distance to that center.
    """
    mid = 0.5 * (a1 + a2)
    axis = a2 - a1
    length = np.sqrt(np.sum(axis * axis))
    d = centers - mid
    if length > 0.0:
        u = axis / length
        longi = np.sum(d * u, axis=1)
        lat_vec = d - longi[:, None] * u
        lateral = np.sqrt(np.sum(lat_vec * lat_vec, axis=1))
        overshoot = np.maximum(0.0, np.abs(longi) - 0.5 * length)
    else:
        lateral = np.sqrt(np.sum(d * d, axis=1))
        overshoot = np.zeros(len(centers))
    return -(lateral + alpha * overshoot)


def grid_nearest_cell_np(cells, ox, oy, res, px, py):
    """Flat index of the traversable cell whose center is nearest (px, py)."""
    h, w = cells.shape
    xs = ox + (np.arange(w) + 0.5) * res
    ys = oy + (np.arange(h) + 0.5) * res
    dx = xs[None, :] - px
    dy = ys[:, None] - py
    d2 = dx * dx + dy * dy
    d2 = np.where(cells, d2, np.inf)
    idx = int(np.argmin(d2))
    if not np.isfinite(d2.flat[idx]):
        return -1
    return idx


def grid_standoff_cell_np(cells, ox, oy, res, ax, ay, dmin, max_radius):
    """Traversable cell nearest (ax, ay) at standoff >= dmin.

    When no cell meets the standoff, best effort: the traversable cell
    farthest from the anchor (within ``max_radius`` when >= 0). Returns -1
    only when no traversable cell lies within the search radius.
    """
    h, w = cells.shape
    xs = ox + (np.arange(w) + 0.5) * res
    ys = oy + (np.arange(h) + 0.5) * res
    dx = xs[None, :] - ax
    dy = ys[:, None] - ay
    d2 = dx * dx + dy * dy
    reachable = cells.copy()
    if max_radius >= 0.0:
        reachable &= d2 <= max_radius * max_radius
    if not reachable.any():
        return -1
    ok = reachable & (d2 >= dmin * dmin)
    if ok.any():
        masked = np.where(ok, d2, np.inf)
        return int(np.argmin(masked))
    masked = np.where(reachable, d2, -np.inf)
    return int(np.argmax(masked))


def aabb_conflicts_np(centers, extents, c, e, margin):
    """True when the box (c, e) comes within ``margin`` of any listed box."""
    if len(centers) == 0:
        return False
    dc = np.abs(centers - c)
    return bool(np.all(dc < extents + e + margin, axis=1).any())


# ---------------------------------------------------------------------------
# numba implementations

if USING_NUMBA:

    @_njit(cache=True)
    def _box_gap_distances_nb(centers, extents, acenter, aextent):
        n = centers.shape[0]
        out = np.empty(n)
        for i in range(n):
            s2 = 0.0
            c2 = 0.0
            for k in range(3):
                dc = abs(centers[i, k] - acenter[k])
                gap = dc - (extents[i, k] + aextent[k])
                if gap > 0.0:
                    s2 += gap * gap
                diff = centers[i, k] - acenter[k]
                c2 += diff * diff
            surface = np.sqrt(s2)
            out[i] = surface if surface > 0.0 else np.sqrt(c2)
        return out

    @_njit(cache=True)
    def _between_scores_nb(centers, a1, a2, alpha):
        n = centers.shape[0]
        out = np.empty(n)
        l2 = 0.0
        for k in range(3):
            diff = a2[k] - a1[k]
            l2 += diff * diff
        length = np.sqrt(l2)
        for i in range(n):
            if length > 0.0:
                longi = 0.0
                for k in range(3):
                    d = centers[i, k] - 0.5 * (a1[k] + a2[k])
                    longi += d * ((a2[k] - a1[k]) / length)
                lat2 = 0.0
                for k in range(3):
                    d = centers[i, k] - 0.5 * (a1[k] + a2[k])
                    lv = d - longi * ((a2[k] - a1[k]) / length)
                    lat2 += lv * lv
                lateral = np.sqrt(lat2)
                over = abs(longi) - 0.5 * length
                if over < 0.0:
                    over = 0.0
                out[i] = -(lateral + alpha * over)
            else:
                d2 = 0.0
                for k in range(3):
                    d = centers[i, k] - 0.5 * (a1[k] + a2[k])
                    d2 += d * d
                out[i] = -np.sqrt(d2)
        return out

    @_njit(cache=True)
    def _grid_nearest_cell_nb(cells, ox, oy, res, px, py):
        h, w = cells.shape
        best = -1
        best_d2 = np.inf
        for i in range(h):
            dy = oy + (i + 0.5) * res - py
            for j in range(w):
                if not cells[i, j]:
                    continue
                dx = ox + (j + 0.5) * res - px
                d2 = dx * dx + dy * dy
                if d2 < best_d2:
                    best_d2 = d2
                    best = i * w + j
        return best

    @_njit(cache=True)
    def _grid_standoff_cell_nb(cells, ox, oy, res, ax, ay, dmin, max_radius):
        h, w = cells.shape
        dmin2 = dmin * dmin
        rmax2 = max_radius * max_radius if max_radius >= 0.0 else -1.0
        best = -1
        best_d2 = np.inf
        far = -1
        far_d2 = -np.inf
        for i in range(h):
            dy = oy + (i + 0.5) * res - ay
            for j in range(w):
                if not cells[i, j]:
                    continue
                dx = ox + (j + 0.5) * res - ax
                d2 = dx * dx + dy * dy
                if rmax2 >= 0.0 and d2 > rmax2:
                    continue
                if d2 >= dmin2 and d2 < best_d2:
                    best_d2 = d2
                    best = i * w + j
                if d2 > far_d2:
                    far_d2 = d2
                    far = i * w + j
        if best >= 0:
            return best
        return far

    @_njit(cache=True)
    def _aabb_conflicts_nb(centers, extents, c, e, margin):
        n = centers.shape[0]
        for i in range(n):
            inside = True
            for k in range(3):
                if abs(centers[i, k] - c[k]) >= extents[i, k] + e[k] + margin:
                    inside = False
                    break
            if inside:
                return True
        return False

    box_gap_distances = _box_gap_distances_nb
    between_scores = _between_scores_nb
    grid_nearest_cell = _grid_nearest_cell_nb
    grid_standoff_cell = _grid_standoff_cell_nb
    aabb_conflicts = _aabb_conflicts_nb
else:
    box_gap_distances = box_gap_distances_np
    between_scores = between_scores_np
    grid_nearest_cell = grid_nearest_cell_np
    grid_standoff_cell = grid_standoff_cell_np
    aabb_conflicts = aabb_conflicts_np


def warmup() -> None:
    """Trigger JIT compilation of every kernel (no-op on the numpy path)."""
    centers = np.zeros((2, 3))
    extents = np.full((2, 3), 0.1)
    vec = np.zeros(3)
    one = np.ones(3)
    cells = np.ones((2, 2), dtype=np.bool_)
    box_gap_distances(centers, extents, one, extents[0])
    between_scores(centers, vec, one, 2.0)
    grid_nearest_cell(cells, 0.0, 0.0, 0.1, 0.05, 0.05)
    grid_standoff_cell(cells, 0.0, 0.0, 0.1, 0.05, 0.05, 0.0, -1.0)
    aabb_conflicts(centers, extents, one, extents[0], 0.1)
