"""Map-quality baseline: mean differential entropy of local point neighborhoods.

Every map point gets the Gaussian differential entropy of the 2-D sample
covariance of all points within a fixed radius; averaging over points gives a
map entropy H. The detector compares H of the merged map against the H of its
current-epoch and merged-in parts: mixed-up geometry (criss-crossing walls)
inflates local covariances, so an entropy increase hints at an invalid merge.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..model import GraphSnapshot
from .base import DetectorReport

LN_2PIE = math.log(2.0 * math.pi * math.e)


@dataclass
class EntropyConfig:
    radius: float = 0.3
    min_neighbors: int = 5
    delta_formula: str = "mean_of_parts"  # or "literal"
    t_unmerge: float = 0.1
    sample_cap: int = 8000  # max averaged query points; neighborhoods always use all points

    def __post_init__(self):
        if self.delta_formula not in ("mean_of_parts", "literal"):
            raise ValueError("delta_formula must be mean_of_parts or literal")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.min_neighbors < 3:
            raise ValueError("min_neighbors must be >= 3")


def point_entropy(q, neighbors, min_neighbors: int = 5) -> float | None:
    """Entropy of one point given all map points within the radius (q included).

    Returns None (skip) for fewer than min_neighbors neighbors or a degenerate
    covariance.
    """
    pts = np.asarray(neighbors, dtype=float)
    if pts.shape[0] < min_neighbors:
        return None
    # population covariance: exactly invariant to duplicating the point set
    cov = np.cov(pts.T, ddof=0)
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    if det <= 0.0:
        return None
    return LN_2PIE + 0.5 * math.log(det)


@njit(cache=True)
def _moments_kernel(qx, qy, px, py, order, starts, counts, ncols, imin, jmin,
                    radius, out):
    """Centered second moments of each query's radius neighborhood.

    Points are grouped by grid cell (cell edge = radius): `order` lists point
    indices sorted by flat cell id, `starts`/`counts` index into it. For each
    query the nine surrounding cells are scanned. Accumulation is centered at
    the query point, which keeps the moment arithmetic well conditioned.
    out rows: [count, sx, sy, sxx, sxy, syy]
    """
    radius2 = radius * radius
    nrows = starts.shape[0] // ncols if ncols > 0 else 0
    for k in range(qx.shape[0]):
        x = qx[k]
        y = qy[k]
        ci = int(np.floor(x / radius)) - imin
        cj = int(np.floor(y / radius)) - jmin
        cnt = 0.0
        sx = 0.0
        sy = 0.0
        sxx = 0.0
        sxy = 0.0
        syy = 0.0
        for di in range(-1, 2):
            ii = ci + di
            if ii < 0 or ii >= nrows:
                continue
            for dj in range(-1, 2):
                jj = cj + dj
                if jj < 0 or jj >= ncols:
                    continue
                flat = ii * ncols + jj
                s = starts[flat]
                for t in range(s, s + counts[flat]):
                    p = order[t]
                    dx = px[p] - x
                    dy = py[p] - y
                    if dx * dx + dy * dy <= radius2:
                        cnt += 1.0
                        sx += dx
                        sy += dy
                        sxx += dx * dx
                        sxy += dx * dy
                        syy += dy * dy
        out[k, 0] = cnt
        out[k, 1] = sx
        out[k, 2] = sy
        out[k, 3] = sxx
        out[k, 4] = sxy
        out[k, 5] = syy


class _CellIndex:
    """Uniform binning of points with cell edge = radius (3x3 neighborhood covers it)."""

    def __init__(self, points: np.ndarray, radius: float):
        self.radius = radius
        self.px = np.ascontiguousarray(points[:, 0])
        self.py = np.ascontiguousarray(points[:, 1])
        ci = np.floor(self.px / radius).astype(np.int64)
        cj = np.floor(self.py / radius).astype(np.int64)
        self.imin = int(ci.min())
        self.jmin = int(cj.min())
        nrows = int(ci.max()) - self.imin + 1
        self.ncols = int(cj.max()) - self.jmin + 1
        flat = (ci - self.imin) * self.ncols + (cj - self.jmin)
        self.order = np.argsort(flat, kind="stable").astype(np.int64)
        ncells = nrows * self.ncols
        self.counts = np.bincount(flat, minlength=ncells).astype(np.int64)
        self.starts = np.concatenate(([0], np.cumsum(self.counts)[:-1])).astype(np.int64)

    def moments(self, queries: np.ndarray) -> np.ndarray:
        out = np.empty((queries.shape[0], 6))
        _moments_kernel(
            np.ascontiguousarray(queries[:, 0]),
            np.ascontiguousarray(queries[:, 1]),
            self.px,
            self.py,
            self.order,
            self.starts,
            self.counts,
            self.ncols,
            self.imin,
            self.jmin,
            self.radius,
            out,
        )
        return out

    def neighbors(self, q: np.ndarray) -> np.ndarray:
        """Indices of points within the radius of q (accelerated query)."""
        d2 = (self.px - q[0]) ** 2 + (self.py - q[1]) ** 2
        return np.nonzero(d2 <= self.radius * self.radius)[0]


def _entropies_from_moments(m: np.ndarray, min_neighbors: int) -> np.ndarray:
    """Per-query h, NaN where skipped. m rows: [count, sx, sy, sxx, sxy, syy]."""
    n = m[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        mx = m[:, 1] / n
        my = m[:, 2] / n
        cxx = m[:, 3] / n - mx * mx
        cxy = m[:, 4] / n - mx * my
        cyy = m[:, 5] / n - my * my
        det = cxx * cyy - cxy * cxy
        h = LN_2PIE + 0.5 * np.log(det)
    h[(n < min_neighbors) | ~(det > 0.0)] = np.nan
    return h


def map_entropy(points: np.ndarray, cfg: EntropyConfig | None = None) -> float:
    """Mean point entropy of a map (union of scan endpoints in the world frame)."""
    cfg = cfg or EntropyConfig()
    points = np.asarray(points, dtype=float)
    if points.shape[0] == 0:
        raise ValueError("cannot compute entropy of an empty map")
    queries = points
    if points.shape[0] > cfg.sample_cap:
        rng = np.random.default_rng(points.shape[0])  # deterministic for a given map size
        queries = points[rng.choice(points.shape[0], cfg.sample_cap, replace=False)]
    index = _CellIndex(points, cfg.radius)
    h = _entropies_from_moments(index.moments(queries), cfg.min_neighbors)
    valid = ~np.isnan(h)
    if not valid.any():
        raise ValueError("every point was skipped (too sparse or degenerate)")
    return float(h[valid].mean())


class EntropyDetector:
    """Entropy-difference detector; slow by nature, used as a baseline."""

    name = "entropy"

    def __init__(self, cfg: EntropyConfig | None = None):
        self.cfg = cfg or EntropyConfig()

    def on_merge(self, snapshot: GraphSnapshot) -> None:
        pass

    def on_unmerge(self) -> None:
        pass

    def update(self, snapshot: GraphSnapshot, new_vertex_id: int) -> DetectorReport:
        t0 = time.perf_counter()
        if len(snapshot.epochs) < 2:
            raise ValueError("entropy detector requires a merged graph (>= 2 epochs)")
        cur_pts = []
        other_pts = []
        for v in snapshot.vertices.values():
            if len(v.scan) == 0:
                continue
            pts = v.scan.points_global(v.pose)
            (cur_pts if v.epoch == snapshot.current_epoch else other_pts).append(pts)
        if not cur_pts or not other_pts:
            raise ValueError("both the current epoch and merged-in epochs need points")
        cur = np.vstack(cur_pts)
        other = np.vstack(other_pts)
        h_all = map_entropy(np.vstack([cur, other]), self.cfg)
        h_cur = map_entropy(cur, self.cfg)
        h_other = map_entropy(other, self.cfg)
        if self.cfg.delta_formula == "mean_of_parts":
            delta = h_all - 0.5 * (h_cur + h_other)
        else:
            delta = h_all - 0.5 * (h_cur - h_other)
        ms = (time.perf_counter() - t0) * 1e3
        return DetectorReport(self.name, new_vertex_id, delta, delta > self.cfg.t_unmerge, ms)
