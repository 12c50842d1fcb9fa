"""Invalid-merge detection via free-space violations between scan pairs.

Each point of a target scan is transformed into a source scan's polar frame
and compared against the ranges the source measured in that direction. A point
well in front of the source surface violates free space (*change*), a point on
the surface *agrees*, everything else is *no info*. Labels are fused per point
over all pairings (agree wins over change, change over no info) and the ratio
change/(agree+change) drives the unmerge decision.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..geometry import Pose2, wrap_angle
from ..model import GraphSnapshot, Scan
from ..raster import visited_cells
from .base import DetectorReport

TWO_PI = 2.0 * math.pi


class ClassLabel(IntEnum):
    """Per-point classification; numeric order is the fusion order."""

    NO_INFO = 0
    CHANGE = 1
    AGREE = 2


def fuse(old: ClassLabel, new: ClassLabel) -> ClassLabel:
    """Label fusion: agree if either agrees, no_info only if both know nothing."""
    return ClassLabel(max(old, new))


@dataclass
class ChangeDetectorConfig:
    t_r: float = 0.1
    t_alpha: float = math.radians(3.0)
    n_recent: int = 10
    tau_overlap: float = 1.0  # m^2 of shared visibility-grid area
    t_unmerge: float = 0.5
    cache_invalidate_trans: float = 0.02
    cache_invalidate_rot: float = math.radians(0.5)
    grid_cell: float = 0.2  # visibility grid cell size

    def __post_init__(self):
        thresholds = (self.t_r, self.t_alpha, self.n_recent, self.tau_overlap,
                      self.cache_invalidate_trans, self.cache_invalidate_rot,
                      self.grid_cell)
        if any(v <= 0 for v in thresholds):
            raise ValueError("all change-detector thresholds must be positive")
        if not 0.0 < self.t_unmerge < 1.0:
            raise ValueError("t_unmerge must lie in (0, 1)")


def classify_scan_pair(
    target: Scan,
    source: Scan,
    cfg: ChangeDetectorConfig,
    target_pose: Pose2 | None = None,
    source_pose: Pose2 | None = None,
) -> np.ndarray:
    """Classify every target point against the source scan's free space.

    Returns an int8 array of ClassLabel values, one per target point. Poses
    default to the scans' own poses; detectors pass snapshot poses instead.

    Rules, applied to the target point's polar coordinates (bearing, r) in the
    source sensor frame and the min/max range (rmin, rmax) of source points
    within t_alpha bearing distance:
      * no neighbors, bearing outside the source field of view, r beyond the
        source range limit, r > rmax + t_r (occluded), or an unreliable band
        (rmax - rmin > 2*t_r)  ->  no_info
      * r < rmin - t_r                     ->  change (free-space violation)
      * r in [rmin - t_r, rmax + t_r]      ->  agree
    """
    tp = target_pose or target.pose
    sp = source_pose or source.pose
    n = len(target)
    labels = np.zeros(n, dtype=np.int8)  # NO_INFO
    if n == 0 or len(source) == 0:
        return labels

    local = sp.transform_inverse(tp.transform(target.points_local()))
    bt = np.arctan2(local[:, 1], local[:, 0])
    rt = np.hypot(local[:, 0], local[:, 1])

    sb = source.bearings
    sr = source.ranges
    t_alpha = cfg.t_alpha
    t_r = cfg.t_r
    # a sweep whose uncovered gap is smaller than the neighbor window behaves
    # like a full circle: windows wrap across +-pi and there is no FOV boundary
    full_circle = (sb[-1] - sb[0]) >= (TWO_PI - 2.0 * t_alpha)

    candidate = rt <= source.range_max
    if not full_circle:
        candidate &= (bt >= sb[0]) & (bt <= sb[-1])
    idx = np.nonzero(candidate)[0]
    if idx.size == 0:
        return labels

    lo = np.searchsorted(sb, bt[idx] - t_alpha, side="left")
    hi = np.searchsorted(sb, bt[idx] + t_alpha, side="right")

    wraps = full_circle & (
        (bt[idx] - t_alpha < -math.pi) | (bt[idx] + t_alpha > math.pi)
    )
    plain = ~wraps

    rmin = np.full(idx.size, np.inf)
    rmax = np.full(idx.size, -np.inf)

    pl = np.nonzero(plain & (lo < hi))[0]
    if pl.size:
        # interleaved reduceat over [lo, hi) windows; sentinel element keeps
        # end indices in bounds
        sr_ext = np.append(sr, sr[-1])
        bounds = np.empty(2 * pl.size, dtype=np.int64)
        bounds[0::2] = lo[pl]
        bounds[1::2] = hi[pl]
        rmin[pl] = np.minimum.reduceat(sr_ext, bounds)[0::2]
        rmax[pl] = np.maximum.reduceat(sr_ext, bounds)[0::2]

    for k in np.nonzero(wraps)[0]:
        b = bt[idx[k]]
        pieces = [sr[lo[k] : hi[k]]]
        if b - t_alpha < -math.pi:
            lo_w = np.searchsorted(sb, b - t_alpha + TWO_PI, side="left")
            pieces.append(sr[lo_w:])
        if b + t_alpha > math.pi:
            hi_w = np.searchsorted(sb, b + t_alpha - TWO_PI, side="right")
            pieces.append(sr[:hi_w])
        vals = np.concatenate(pieces)
        if vals.size:
            rmin[k] = vals.min()
            rmax[k] = vals.max()

    has_near = np.isfinite(rmin)
    band_ok = has_near & ((rmax - rmin) <= 2.0 * t_r)
    r = rt[idx]
    change = band_ok & (r < rmin - t_r)
    agree = band_ok & (r >= rmin - t_r) & (r <= rmax + t_r)
    out = np.zeros(idx.size, dtype=np.int8)
    out[change] = int(ClassLabel.CHANGE)
    out[agree] = int(ClassLabel.AGREE)
    labels[idx] = out
    return labels


@dataclass(frozen=True)
class VisibilityGrid:
    """Which non-current-epoch scans observed each cell; built once per merge."""

    cell_size: float
    cells: dict  # (i, j) -> set of vertex ids


def build_visibility_grid(snapshot: GraphSnapshot, cell_size: float) -> VisibilityGrid:
    cells: dict[tuple[int, int], set[int]] = {}
    for vid in snapshot.other_ids():
        v = snapshot.vertices[vid]
        for key in map(tuple, _observed_cells(v.scan, v.pose, cell_size).tolist()):
            cells.setdefault(key, set()).add(vid)
    return VisibilityGrid(cell_size, cells)


def _observed_cells(scan: Scan, pose: Pose2, cell_size: float) -> np.ndarray:
    origin = np.array([pose.x, pose.y])
    return visited_cells(origin, scan.points_global(pose), cell_size)


def _overlap_counts(
    snapshot: GraphSnapshot, grid: VisibilityGrid, tid: int
) -> dict[int, int]:
    """Shared observed-cell counts between one current-epoch scan and each source."""
    v = snapshot.vertices[tid]
    counts: dict[int, int] = {}
    lookup = grid.cells
    for key in map(tuple, _observed_cells(v.scan, v.pose, grid.cell_size).tolist()):
        for sid in lookup.get(key, ()):
            counts[sid] = counts.get(sid, 0) + 1
    return counts


def select_pairs(
    snapshot: GraphSnapshot, grid: VisibilityGrid, cfg: ChangeDetectorConfig
) -> list[tuple[int, int]]:
    """Pair recent current-epoch scans with other-epoch scans sharing enough area.

    Shared area = number of cells observed by both scans times the cell area.
    """
    recent = snapshot.current_ids()[-cfg.n_recent :]
    area = grid.cell_size * grid.cell_size
    pairs = []
    for tid in recent:
        counts = _overlap_counts(snapshot, grid, tid)
        for sid in sorted(counts):
            if counts[sid] * area >= cfg.tau_overlap:
                pairs.append((tid, sid))
    return pairs


@dataclass
class _CacheEntry:
    labels: np.ndarray
    target_pose: Pose2
    source_pose: Pose2


def _moved(a: Pose2, b: Pose2, cfg: ChangeDetectorConfig) -> bool:
    return (
        math.hypot(a.x - b.x, a.y - b.y) > cfg.cache_invalidate_trans
        or abs(wrap_angle(a.theta - b.theta)) > cfg.cache_invalidate_rot
    )


class ChangeDetector:
    """Stateful change-detection pipeline over graph snapshots."""

    name = "change"

    def __init__(self, cfg: ChangeDetectorConfig | None = None):
        self.cfg = cfg or ChangeDetectorConfig()
        self.grid: VisibilityGrid | None = None
        # cache[target][source] -> labels of the target's points vs that source
        self.cache: dict[int, dict[int, _CacheEntry]] = {}
        # per-target overlap counts, invalidated when the target pose moves
        self._overlap: dict[int, tuple[Pose2, dict[int, int]]] = {}
        self.classify_calls = 0  # instrumentation for cache tests

    def on_merge(self, snapshot: GraphSnapshot) -> None:
        self.grid = build_visibility_grid(snapshot, self.cfg.grid_cell)
        self._overlap.clear()

    def on_unmerge(self) -> None:
        self.grid = None
        self.cache.clear()
        self._overlap.clear()

    def invalidate_cache(self, moved_vertices) -> None:
        """Drop cached classifications involving any vertex in moved_vertices."""
        moved = set(moved_vertices)
        for tid in list(self.cache):
            if tid in moved:
                del self.cache[tid]
                continue
            row = self.cache[tid]
            for sid in [s for s in row if s in moved]:
                del row[sid]
        for tid in [t for t in self._overlap if t in moved]:
            del self._overlap[tid]

    def _drop_stale(self, snapshot: GraphSnapshot) -> None:
        for tid in list(self.cache):
            t = snapshot.vertices.get(tid)
            if t is None:
                del self.cache[tid]
                continue
            row = self.cache[tid]
            for sid in list(row):
                s = snapshot.vertices.get(sid)
                entry = row[sid]
                if (
                    s is None
                    or _moved(entry.target_pose, t.pose, self.cfg)
                    or _moved(entry.source_pose, s.pose, self.cfg)
                ):
                    del row[sid]

    def _classify_pair(self, snapshot: GraphSnapshot, tid: int, sid: int) -> None:
        row = self.cache.setdefault(tid, {})
        if sid in row:
            return
        t = snapshot.vertices[tid]
        s = snapshot.vertices[sid]
        labels = classify_scan_pair(
            t.scan, s.scan, self.cfg, target_pose=t.pose, source_pose=s.pose
        )
        self.classify_calls += 1
        row[sid] = _CacheEntry(labels, t.pose, s.pose)

    def _pairs(self, snapshot: GraphSnapshot) -> list[tuple[int, int]]:
        recent = snapshot.current_ids()[-self.cfg.n_recent :]
        area = self.grid.cell_size ** 2
        pairs = []
        for tid in recent:
            pose = snapshot.vertices[tid].pose
            cached = self._overlap.get(tid)
            if cached is None or _moved(cached[0], pose, self.cfg):
                counts = _overlap_counts(snapshot, self.grid, tid)
                self._overlap[tid] = (pose, counts)
            else:
                counts = cached[1]
            for sid in sorted(counts):
                if counts[sid] * area >= self.cfg.tau_overlap:
                    pairs.append((tid, sid))
        return pairs

    def fused_labels(self, vid: int, n_points: int) -> np.ndarray:
        """Pointwise fusion (max) over all cached classifications targeting vid."""
        fused = np.zeros(n_points, dtype=np.int8)
        for entry in self.cache.get(vid, {}).values():
            np.maximum(fused, entry.labels, out=fused)
        return fused

    def update(self, snapshot: GraphSnapshot, new_vertex_id: int) -> DetectorReport:
        t0 = time.perf_counter()
        if len(snapshot.epochs) < 2:
            raise ValueError("change detector requires a merged graph (>= 2 epochs)")
        if self.grid is None:
            self.on_merge(snapshot)
        self._drop_stale(snapshot)
        pairs = self._pairs(snapshot)
        considered: set[int] = set()
        for tid, sid in pairs:
            self._classify_pair(snapshot, tid, sid)
            self._classify_pair(snapshot, sid, tid)
            considered.add(tid)
            considered.add(sid)

        n_change = 0
        n_agree = 0
        for vid in considered:
            fused = self.fused_labels(vid, len(snapshot.vertices[vid].scan))
            n_change += int(np.count_nonzero(fused == ClassLabel.CHANGE))
            n_agree += int(np.count_nonzero(fused == ClassLabel.AGREE))
        denom = n_change + n_agree
        score = (n_change / denom) if denom else 0.0
        ms = (time.perf_counter() - t0) * 1e3
        return DetectorReport(self.name, new_vertex_id, score, score > self.cfg.t_unmerge, ms)

    def dump_classifications(self, path) -> None:
        """CSV of fused labels: vertex id, point index, label name."""
        with open(path, "w") as f:
            f.write("vertex_id,point_index,label\n")
            for vid in sorted(self.cache):
                row = self.cache[vid]
                if not row:
                    continue
                n = max(e.labels.size for e in row.values())
                fused = self.fused_labels(vid, n)
                for i, lab in enumerate(fused):
                    f.write(f"{vid},{i},{ClassLabel(lab).name.lower()}\n")
