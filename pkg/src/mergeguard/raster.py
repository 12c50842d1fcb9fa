"""Exact grid traversal of ray segments (Amanatides-Woo stepping), numba-jitted.

Cell (i, j) covers [x0 + i*h, x0 + (i+1)*h) x [y0 + j*h, y0 + (j+1)*h). A ray
visits exactly the cells its segment passes through; cells are emitted only
inside the nx-by-ny window. Shared by the gridmap detector and the visibility
grid of the change detector.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

UNKNOWN = np.uint8(0)
EMPTY = np.uint8(1)
OCCUPIED = np.uint8(2)


@njit(cache=True)
def _trace_into_grid(ox, oy, exs, eys, x0, y0, h, grid):
    """Rasterize rays from one sensor position into a tri-state grid.

    Cells strictly between sensor and endpoint become EMPTY (never overriding
    OCCUPIED); the endpoint cell becomes OCCUPIED. Marks apply only inside the
    grid window.
    """
    nx, ny = grid.shape
    six = int(math.floor((ox - x0) / h))
    siy = int(math.floor((oy - y0) / h))
    for k in range(exs.shape[0]):
        ex = exs[k]
        ey = eys[k]
        eix = int(math.floor((ex - x0) / h))
        eiy = int(math.floor((ey - y0) / h))
        dx = ex - ox
        dy = ey - oy
        ix, iy = six, siy
        if dx > 0.0:
            step_x = 1
            tmax_x = ((x0 + (ix + 1) * h) - ox) / dx
            tdelta_x = h / dx
        elif dx < 0.0:
            step_x = -1
            tmax_x = ((x0 + ix * h) - ox) / dx
            tdelta_x = -h / dx
        else:
            step_x = 0
            tmax_x = np.inf
            tdelta_x = np.inf
        if dy > 0.0:
            step_y = 1
            tmax_y = ((y0 + (iy + 1) * h) - oy) / dy
            tdelta_y = h / dy
        elif dy < 0.0:
            step_y = -1
            tmax_y = ((y0 + iy * h) - oy) / dy
            tdelta_y = -h / dy
        else:
            step_y = 0
            tmax_y = np.inf
            tdelta_y = np.inf

        max_steps = abs(eix - ix) + abs(eiy - iy)
        for _ in range(max_steps + 1):
            if ix == eix and iy == eiy:
                break
            # current cell is strictly between sensor and endpoint unless it is
            # the sensor's own cell
            if not (ix == six and iy == siy):
                if 0 <= ix < nx and 0 <= iy < ny and grid[ix, iy] != OCCUPIED:
                    grid[ix, iy] = EMPTY
            if tmax_x < tmax_y:
                ix += step_x
                tmax_x += tdelta_x
            else:
                iy += step_y
                tmax_y += tdelta_y
        if 0 <= eix < nx and 0 <= eiy < ny:
            grid[eix, eiy] = OCCUPIED


@njit(cache=True)
def _visited_cells(ox, oy, exs, eys, h, out):
    """All cells touched by rays (sensor cell, crossed cells, endpoint cell).

    Writes (i, j) pairs into `out`; returns the number written. `out` must be
    large enough (sum over rays of |di|+|dj|+1 rows).
    """
    n = 0
    six = int(math.floor(ox / h))
    siy = int(math.floor(oy / h))
    for k in range(exs.shape[0]):
        ex = exs[k]
        ey = eys[k]
        eix = int(math.floor(ex / h))
        eiy = int(math.floor(ey / h))
        dx = ex - ox
        dy = ey - oy
        ix, iy = six, siy
        if dx > 0.0:
            step_x = 1
            tmax_x = (((ix + 1) * h) - ox) / dx
            tdelta_x = h / dx
        elif dx < 0.0:
            step_x = -1
            tmax_x = ((ix * h) - ox) / dx
            tdelta_x = -h / dx
        else:
            step_x = 0
            tmax_x = np.inf
            tdelta_x = np.inf
        if dy > 0.0:
            step_y = 1
            tmax_y = (((iy + 1) * h) - oy) / dy
            tdelta_y = h / dy
        elif dy < 0.0:
            step_y = -1
            tmax_y = ((iy * h) - oy) / dy
            tdelta_y = -h / dy
        else:
            step_y = 0
            tmax_y = np.inf
            tdelta_y = np.inf

        max_steps = abs(eix - ix) + abs(eiy - iy)
        for _ in range(max_steps + 1):
            out[n, 0] = ix
            out[n, 1] = iy
            n += 1
            if ix == eix and iy == eiy:
                break
            if tmax_x < tmax_y:
                ix += step_x
                tmax_x += tdelta_x
            else:
                iy += step_y
                tmax_y += tdelta_y
    return n


def trace_rays(origin: np.ndarray, endpoints: np.ndarray, x0: float, y0: float,
               h: float, grid: np.ndarray) -> None:
    """Mark a tri-state grid from one scan (see _trace_into_grid)."""
    if endpoints.shape[0] == 0:
        return
    _trace_into_grid(
        float(origin[0]), float(origin[1]),
        np.ascontiguousarray(endpoints[:, 0]), np.ascontiguousarray(endpoints[:, 1]),
        float(x0), float(y0), float(h), grid,
    )


def visited_cells(origin: np.ndarray, endpoints: np.ndarray, h: float) -> np.ndarray:
    """Unique (i, j) cells observed by a scan (beam paths plus endpoints)."""
    if endpoints.shape[0] == 0:
        return np.empty((0, 2), dtype=np.int64)
    ox, oy = float(origin[0]), float(origin[1])
    exs = np.ascontiguousarray(endpoints[:, 0])
    eys = np.ascontiguousarray(endpoints[:, 1])
    six = math.floor(ox / h)
    siy = math.floor(oy / h)
    cap = int(
        np.sum(
            np.abs(np.floor(exs / h) - six) + np.abs(np.floor(eys / h) - siy) + 1
        )
    )
    buf = np.empty((cap, 2), dtype=np.int64)
    n = _visited_cells(ox, oy, exs, eys, float(h), buf)
    return np.unique(buf[:n], axis=0)
