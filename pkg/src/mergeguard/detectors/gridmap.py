"""Invalid-merge detection by contradiction counting between two occupancy grids.

One tri-state grid (empty / occupied / unknown) is rasterized from the most
recent current-epoch scans, another from all merged-in scans covering the same
bounding box. Occupied areas are dilated to absorb small misalignments, then
cells where one grid says empty and the other occupied are counted against the
jointly observed cells.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from ..geometry import Pose2
from ..model import GraphSnapshot, Scan
from ..raster import EMPTY, OCCUPIED, UNKNOWN, trace_rays
from .base import DetectorReport


@dataclass
class GridmapDetectorConfig:
    cell_size: float = 0.025
    n_recent: int = 10
    dilation: int = 3  # structuring element half width -> (2h+1) x (2h+1)
    tau_overlap_cells: int = 800
    t_unmerge: float = 0.2

    def __post_init__(self):
        if min(self.cell_size, self.n_recent, self.dilation,
               self.tau_overlap_cells, self.t_unmerge) <= 0:
            raise ValueError("all gridmap-detector settings must be positive")


@dataclass
class TriStateGrid:
    """Dense tri-state occupancy grid over an axis-aligned window."""

    origin: tuple[float, float]
    cell_size: float
    cells: np.ndarray  # uint8 (nx, ny), values UNKNOWN/EMPTY/OCCUPIED

    @property
    def extents(self) -> tuple[int, int]:
        return self.cells.shape

    def same_geometry(self, other: "TriStateGrid") -> bool:
        return (
            self.origin == other.origin
            and self.cell_size == other.cell_size
            and self.cells.shape == other.cells.shape
        )


def grid_for_bbox(bbox, cell_size: float) -> TriStateGrid:
    xmin, ymin, xmax, ymax = bbox
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("bounding box must be non-degenerate")
    nx = max(1, int(math.ceil((xmax - xmin) / cell_size - 1e-12)))
    ny = max(1, int(math.ceil((ymax - ymin) / cell_size - 1e-12)))
    return TriStateGrid((xmin, ymin), cell_size, np.zeros((nx, ny), dtype=np.uint8))


def build_grid(scans: list[tuple[Scan, Pose2]], bbox, cell_size: float) -> TriStateGrid:
    """Rasterize scans into a fresh grid over bbox = (xmin, ymin, xmax, ymax).

    Cells strictly between a sensor and an endpoint become empty, endpoint
    cells occupied (occupied wins conflicts); rays are clipped to the window.
    """
    grid = grid_for_bbox(bbox, cell_size)
    x0, y0 = grid.origin
    for scan, pose in scans:
        if len(scan) == 0:
            continue
        origin = np.array([pose.x, pose.y])
        trace_rays(origin, scan.points_global(pose), x0, y0, cell_size, grid.cells)
    return grid


def dilate_occupied(grid: TriStateGrid, half_width: int) -> TriStateGrid:
    """Grow occupied cells by a square structuring element; other cells keep state."""
    if half_width <= 0:
        return TriStateGrid(grid.origin, grid.cell_size, grid.cells.copy())
    occ = grid.cells == OCCUPIED
    size = 2 * half_width + 1
    grown = maximum_filter(occ, size=size, mode="constant", cval=False)
    cells = grid.cells.copy()
    cells[grown] = OCCUPIED
    return TriStateGrid(grid.origin, grid.cell_size, cells)


def compare(
    current: TriStateGrid, other: TriStateGrid, tau_overlap_cells: int
) -> tuple[float, int, int]:
    """Cell-wise contradiction ratio: (r, overlap cells, contradiction cells)."""
    if not current.same_geometry(other):
        raise ValueError("grids must share origin, cell size and extents")
    a = current.cells
    b = other.cells
    overlap = int(np.count_nonzero((a != UNKNOWN) & (b != UNKNOWN)))
    contradictions = int(
        np.count_nonzero(((a == EMPTY) & (b == OCCUPIED)) | ((a == OCCUPIED) & (b == EMPTY)))
    )
    r = contradictions / overlap if overlap >= tau_overlap_cells and overlap > 0 else 0.0
    return r, overlap, contradictions


def scan_bbox(scan: Scan, pose) -> tuple[float, float, float, float]:
    pts = scan.points_global(pose)
    xs = np.append(pts[:, 0], pose.x)
    ys = np.append(pts[:, 1], pose.y)
    return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())


class GridmapDetector:
    """Stateless gridmap comparison over graph snapshots."""

    name = "gridmap"

    def __init__(self, cfg: GridmapDetectorConfig | None = None):
        self.cfg = cfg or GridmapDetectorConfig()

    def on_merge(self, snapshot: GraphSnapshot) -> None:
        pass

    def on_unmerge(self) -> None:
        pass

    def update(self, snapshot: GraphSnapshot, new_vertex_id: int) -> DetectorReport:
        t0 = time.perf_counter()
        if len(snapshot.epochs) < 2:
            raise ValueError("gridmap detector requires a merged graph (>= 2 epochs)")
        cfg = self.cfg
        recent = snapshot.current_ids()[-cfg.n_recent :]
        cur = [(snapshot.vertices[vid].scan, snapshot.vertices[vid].pose) for vid in recent]
        cur = [(s, p) for s, p in cur if len(s)]
        if not cur:
            ms = (time.perf_counter() - t0) * 1e3
            return DetectorReport(self.name, new_vertex_id, 0.0, False, ms)
        boxes = np.array([scan_bbox(s, p) for s, p in cur])
        bbox = (
            float(boxes[:, 0].min()),
            float(boxes[:, 1].min()),
            float(boxes[:, 2].max()),
            float(boxes[:, 3].max()),
        )
        other = []
        for vid in snapshot.other_ids():
            v = snapshot.vertices[vid]
            if len(v.scan) == 0:
                continue
            b = scan_bbox(v.scan, v.pose)
            if b[0] <= bbox[2] and b[2] >= bbox[0] and b[1] <= bbox[3] and b[3] >= bbox[1]:
                other.append((v.scan, v.pose))
        grid_cur = dilate_occupied(build_grid(cur, bbox, cfg.cell_size), cfg.dilation)
        grid_other = dilate_occupied(build_grid(other, bbox, cfg.cell_size), cfg.dilation)
        r, _overlap, _contr = compare(grid_cur, grid_other, cfg.tau_overlap_cells)
        ms = (time.perf_counter() - t0) * 1e3
        return DetectorReport(self.name, new_vertex_id, r, r > cfg.t_unmerge, ms)


def write_pgm(grid: TriStateGrid, path) -> None:
    """Binary PGM dump: unknown=128, empty=255, occupied=0 (for eyeballing)."""
    lut = np.array([128, 255, 0], dtype=np.uint8)
    img = lut[grid.cells.T[::-1]]  # image rows top-down, y up
    with open(path, "wb") as f:
        f.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        f.write(img.tobytes())
