import math

import numpy as np
import pytest

from mergeguard.detectors.gridmap import (
    GridmapDetector,
    GridmapDetectorConfig,
    TriStateGrid,
    build_grid,
    compare,
    dilate_occupied,
    grid_for_bbox,
    write_pgm,
)
from mergeguard.geometry import Pose2
from mergeguard.model import GraphSnapshot, Scan, SnapshotVertex
from mergeguard.raster import EMPTY, OCCUPIED, UNKNOWN

from conftest import wall_scan
from oracles import brute_grid


def snapshot_of(vertices, current_epoch):
    return GraphSnapshot(
        {vid: SnapshotVertex(epoch, scan.pose, scan) for vid, (epoch, scan) in vertices.items()},
        frozenset(e for e, _ in vertices.values()),
        current_epoch,
    )


def test_single_ray_cell_counts():
    # sensor at a cell center, one 1.0 m ray along +x: 39 empty cells, 1 occupied
    scan = Scan(Pose2(0.0125, 0.0125, 0.0), [0.0], [1.0], 10.0)
    grid = build_grid([(scan, scan.pose)], (0.0, 0.0, 1.2, 0.1), 0.025)
    assert int(np.count_nonzero(grid.cells == EMPTY)) == 39
    assert int(np.count_nonzero(grid.cells == OCCUPIED)) == 1
    occ = np.argwhere(grid.cells == OCCUPIED)
    assert tuple(occ[0]) == (40, 0)


def test_no_scans_all_unknown():
    grid = build_grid([], (0, 0, 1, 1), 0.025)
    assert np.all(grid.cells == UNKNOWN)


def test_occupied_dominates_empty():
    # ray A ends in the cell that ray B passes through
    a = Scan(Pose2(0.0125, 0.0125, 0.0), [0.0], [0.5], 10.0)
    b = Scan(Pose2(0.0125, 0.0125, 0.0), [0.0], [1.0], 10.0)
    grid = build_grid([(b, b.pose), (a, a.pose)], (0, 0, 1.2, 0.1), 0.025)
    end_cell = (int(0.5125 / 0.025), 0)
    assert grid.cells[end_cell] == OCCUPIED
    grid2 = build_grid([(a, a.pose), (b, b.pose)], (0, 0, 1.2, 0.1), 0.025)
    assert np.array_equal(grid.cells, grid2.cells)


def test_dilation_counts():
    grid = grid_for_bbox((0, 0, 1, 1), 0.025)
    grid.cells[20, 20] = OCCUPIED
    out = dilate_occupied(grid, 3)
    assert int(np.count_nonzero(out.cells == OCCUPIED)) == 49
    assert grid.cells[20, 20] == OCCUPIED  # input untouched


def test_dilation_all_unknown_unchanged():
    grid = grid_for_bbox((0, 0, 1, 1), 0.025)
    out = dilate_occupied(grid, 3)
    assert np.all(out.cells == UNKNOWN)


def test_dilation_corner_clipped():
    grid = grid_for_bbox((0, 0, 1, 1), 0.025)
    grid.cells[0, 0] = OCCUPIED
    out = dilate_occupied(grid, 3)
    assert int(np.count_nonzero(out.cells == OCCUPIED)) == 16


def test_dilation_extensive_and_composable():
    rng = np.random.default_rng(5)
    grid = grid_for_bbox((0, 0, 2, 2), 0.05)
    cells = grid.cells
    occ = rng.random(cells.shape) < 0.02
    cells[occ] = OCCUPIED
    cells[(~occ) & (rng.random(cells.shape) < 0.3)] = EMPTY
    once = dilate_occupied(grid, 2)
    assert np.all((grid.cells == OCCUPIED) <= (once.cells == OCCUPIED))
    twice = dilate_occupied(once, 2)
    direct = dilate_occupied(grid, 4)
    assert np.array_equal(twice.cells == OCCUPIED, direct.cells == OCCUPIED)


def test_compare_identity_zero():
    a = wall_scan(Pose2(0.3, -0.2, 0.4))
    grid = dilate_occupied(build_grid([(a, a.pose)], (-4, -4, 4, 4), 0.025), 3)
    r, overlap, contr = compare(grid, grid, 800)
    assert contr == 0
    assert r == 0.0
    assert overlap > 800


def test_compare_full_contradiction():
    a = grid_for_bbox((0, 0, 2.5, 2.5), 0.025)
    b = grid_for_bbox((0, 0, 2.5, 2.5), 0.025)
    a.cells[:] = OCCUPIED
    b.cells[:] = EMPTY
    r, overlap, contr = compare(a, b, 800)
    assert overlap == a.cells.size
    assert contr == a.cells.size
    assert r == 1.0


def test_compare_below_overlap_threshold():
    a = grid_for_bbox((0, 0, 1, 1), 0.025)
    b = grid_for_bbox((0, 0, 1, 1), 0.025)
    a.cells[:20, :35] = OCCUPIED  # 700 cells
    b.cells[:20, :35] = EMPTY
    r, overlap, contr = compare(a, b, 800)
    assert overlap == 700
    assert contr == 700
    assert r == 0.0


def test_compare_symmetry():
    rng = np.random.default_rng(3)
    a = grid_for_bbox((0, 0, 1, 1), 0.05)
    b = grid_for_bbox((0, 0, 1, 1), 0.05)
    a.cells[:] = rng.integers(0, 3, a.cells.shape)
    b.cells[:] = rng.integers(0, 3, b.cells.shape)
    ra = compare(a, b, 10)
    rb = compare(b, a, 10)
    assert ra == rb


def test_compare_geometry_mismatch():
    a = grid_for_bbox((0, 0, 1, 1), 0.05)
    b = grid_for_bbox((0, 0, 1.5, 1), 0.05)
    with pytest.raises(ValueError):
        compare(a, b, 10)


def test_duplicate_scans_change_nothing():
    scan = wall_scan(Pose2(0.5, 0.5, 0.2))
    one = build_grid([(scan, scan.pose)], (-4, -4, 4, 4), 0.025)
    two = build_grid([(scan, scan.pose)] * 2, (-4, -4, 4, 4), 0.025)
    assert np.array_equal(one.cells, two.cells)


def test_build_grid_matches_per_cell_oracle(rng):
    for trial in range(12):
        segs = []
        scans = []
        n_rays = int(rng.integers(3, 9))
        pose = Pose2(rng.uniform(0.3, 1.2), rng.uniform(0.3, 1.2), rng.uniform(-3, 3))
        bearings = np.sort(rng.uniform(-math.pi + 0.01, math.pi, n_rays))
        ranges = rng.uniform(0.2, 1.4, n_rays)
        scan = Scan(pose, bearings, ranges, 10.0)
        bbox = (0.0, 0.0, float(rng.uniform(1.2, 1.6)), float(rng.uniform(1.2, 1.6)))
        fast = build_grid([(scan, pose)], bbox, 0.05)
        slow = brute_grid([(scan, pose)], bbox, 0.05)
        assert np.array_equal(fast.cells, slow), f"trial {trial}"


def test_detector_update_and_pgm(tmp_path):
    cur = [(2, wall_scan(Pose2(0.1 * k, 0, 0))) for k in range(3, 6)]
    other = [(1, wall_scan(Pose2(0.05 + 0.1 * k, 0.02, 0.01))) for k in range(3)]
    vertices = {i + 1: s for i, s in enumerate(other + cur)}
    snap = snapshot_of(vertices, current_epoch=2)
    det = GridmapDetector()
    rep = det.update(snap, 6)
    assert rep.score < 0.05
    assert not rep.alarm
    grid = dilate_occupied(
        build_grid([(s.scan, s.pose) for s in snap.vertices.values()], (-4, -4, 4, 4), 0.025), 3
    )
    out = tmp_path / "grid.pgm"
    write_pgm(grid, out)
    data = out.read_bytes()
    assert data.startswith(b"P5\n")
    assert data.count(b"\x80") > 0  # unknown=128 present


def test_detector_update_no_overlap():
    cur = {2: (2, wall_scan(Pose2(0, 0, 0), wall_distance=3.0))}
    cur[1] = (1, wall_scan(Pose2(500, 0, 0), wall_distance=3.0))
    snap = snapshot_of(cur, current_epoch=2)
    det = GridmapDetector()
    rep = det.update(snap, 2)
    assert rep.score == 0.0
