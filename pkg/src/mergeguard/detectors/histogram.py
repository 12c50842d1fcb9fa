"""Loop-closure-verification baseline: coarse point-count histograms.

Points of the recent current-epoch scans and of all merged-in scans are binned
on a shared coarse grid; the unnormalized intersection kernel (normalized by
the current window's total) measures how much of the current observation mass
the merged-in map supports. 1 - c is the invalidity score.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Pose2
from ..model import GraphSnapshot
from .base import DetectorReport


@dataclass
class HistogramConfig:
    cell_size: float = 0.5
    n_recent: int = 10
    t_unmerge: float = 0.8


@dataclass
class PointHistogram:
    """Sparse 2-D count histogram. Cell (i, j) covers [i*h, (i+1)*h) per axis."""

    origin: tuple[float, float]
    cell_size: float
    counts: dict = field(default_factory=dict)  # (i, j) -> int

    @property
    def total(self) -> int:
        return sum(self.counts.values())


_KEY_SHIFT = np.int64(1) << np.int64(32)


def build_histogram(points, cell_size: float, origin=(0.0, 0.0)) -> PointHistogram:
    """Bin points by floor division; a point on a boundary joins the upper cell."""
    hist = PointHistogram(tuple(origin), cell_size)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        return hist
    ij = np.floor((pts - np.asarray(origin)) / cell_size).astype(np.int64)
    flat = ij[:, 0] * _KEY_SHIFT + ij[:, 1]
    _keys, idx, counts = np.unique(flat, return_index=True, return_counts=True)
    pairs = ij[idx].tolist()
    hist.counts = {(int(a), int(b)): int(c) for (a, b), c in zip(pairs, counts.tolist())}
    return hist


def intersection_score(h1: PointHistogram, h2: PointHistogram) -> float:
    """Intersection kernel normalized by h1's mass: sum min(h1, h2) / sum h1."""
    if h1.origin != h2.origin or h1.cell_size != h2.cell_size:
        raise ValueError("histograms must share origin and cell size")
    total = h1.total
    if total == 0:
        raise ValueError("first histogram is empty")
    inter = sum(min(c, h2.counts.get(key, 0)) for key, c in h1.counts.items())
    return inter / total


def _pose_moved(a: Pose2, b: Pose2) -> bool:
    return (
        math.hypot(a.x - b.x, a.y - b.y) > 0.02
        or abs(a.theta - b.theta) > math.radians(0.5)
    )


class HistogramDetector:
    name = "histogram"

    def __init__(self, cfg: HistogramConfig | None = None):
        self.cfg = cfg or HistogramConfig()
        self._other: tuple[dict, PointHistogram] | None = None  # poses, histogram

    def on_merge(self, snapshot: GraphSnapshot) -> None:
        self._other = None

    def on_unmerge(self) -> None:
        self._other = None

    def _other_histogram(self, snapshot: GraphSnapshot) -> PointHistogram:
        """Histogram of all merged-in points, rebuilt only when their poses move."""
        other_ids = snapshot.other_ids()
        poses = {vid: snapshot.vertices[vid].pose for vid in other_ids}
        if self._other is not None:
            old = self._other[0]
            if old.keys() == poses.keys() and all(
                not _pose_moved(old[vid], poses[vid]) for vid in poses
            ):
                return self._other[1]
        pts = [
            snapshot.vertices[vid].scan.points_global(snapshot.vertices[vid].pose)
            for vid in other_ids
            if len(snapshot.vertices[vid].scan)
        ]
        hist = build_histogram(
            np.vstack(pts) if pts else np.empty((0, 2)), self.cfg.cell_size
        )
        self._other = (poses, hist)
        return hist

    def update(self, snapshot: GraphSnapshot, new_vertex_id: int) -> DetectorReport:
        t0 = time.perf_counter()
        if len(snapshot.epochs) < 2:
            raise ValueError("histogram detector requires a merged graph (>= 2 epochs)")
        recent = snapshot.current_ids()[-self.cfg.n_recent :]
        cur_pts = [
            snapshot.vertices[vid].scan.points_global(snapshot.vertices[vid].pose)
            for vid in recent
            if len(snapshot.vertices[vid].scan)
        ]
        if not cur_pts:
            raise ValueError("current epoch has no scan points")
        h1 = build_histogram(np.vstack(cur_pts), self.cfg.cell_size)
        h2 = self._other_histogram(snapshot)
        score = 1.0 - intersection_score(h1, h2)
        ms = (time.perf_counter() - t0) * 1e3
        return DetectorReport(self.name, new_vertex_id, score, score > self.cfg.t_unmerge, ms)
