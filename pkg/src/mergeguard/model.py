"""Domain model: scans, graph vertices/edges, and the active/inactive graph store.

A store holds exactly one active graph (the one receiving new sensor data) and
any number of inactive graphs from earlier localization epochs. Vertex ids and
epoch ids are allocated by store-global monotone counters so identity stays
stable across merge/unmerge cycles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2

EDGE_KINDS = ("odometry", "loop_closure", "merge_loop_closure")


class Scan:
    """One lidar sweep: a global sensor pose plus polar endpoints.

    Bearings must be strictly increasing; ranges must satisfy 0 < r <= range_max.
    The endpoint arrays are frozen after construction — only the pose may change
    (it mirrors the owning vertex's pose estimate).
    """

    __slots__ = ("pose", "bearings", "ranges", "range_max", "_local")

    def __init__(self, pose: Pose2, bearings, ranges, range_max: float):
        bearings = np.ascontiguousarray(bearings, dtype=float)
        ranges = np.ascontiguousarray(ranges, dtype=float)
        if bearings.ndim != 1 or bearings.shape != ranges.shape:
            raise ValueError("bearings and ranges must be equal-length 1-D arrays")
        if bearings.size > 1 and not np.all(np.diff(bearings) > 0.0):
            raise ValueError("bearings must be strictly increasing within a sweep")
        if ranges.size and (np.any(ranges <= 0.0) or np.any(ranges > range_max)):
            raise ValueError("ranges must satisfy 0 < r <= range_max")
        bearings.flags.writeable = False
        ranges.flags.writeable = False
        self.pose = pose
        self.bearings = bearings
        self.ranges = ranges
        self.range_max = float(range_max)
        self._local = None

    def __len__(self) -> int:
        return self.bearings.size

    def points_local(self) -> np.ndarray:
        """Endpoints in the sensor frame, shape (N, 2). Cached (arrays are frozen)."""
        if self._local is None:
            local = np.empty((self.bearings.size, 2))
            local[:, 0] = self.ranges * np.cos(self.bearings)
            local[:, 1] = self.ranges * np.sin(self.bearings)
            local.flags.writeable = False
            self._local = local
        return self._local

    def points_global(self, pose: Pose2 | None = None) -> np.ndarray:
        """Endpoints in the world frame, using `pose` or the scan's own pose."""
        return (pose or self.pose).transform(self.points_local())

    @staticmethod
    def from_polar(pose: Pose2, bearings, ranges, range_max: float) -> "Scan":
        """Build a scan, dropping invalid returns (None/NaN, r <= 0, r > range_max)."""
        b = np.asarray(
            [x for x in bearings], dtype=float
        )
        r = np.asarray(
            [np.nan if x is None else float(x) for x in ranges], dtype=float
        )
        keep = np.isfinite(r) & (r > 0.0) & (r <= range_max)
        return Scan(pose, b[keep], r[keep], range_max)


class Vertex:
    """Graph node: one scan, its pose estimate, and the epoch it was recorded in.

    The pose property reads/writes the scan's pose so the two never diverge.
    """

    __slots__ = ("id", "epoch", "scan")

    def __init__(self, vid: int, epoch: int, scan: Scan):
        self.id = vid
        self.epoch = epoch
        self.scan = scan

    @property
    def pose(self) -> Pose2:
        return self.scan.pose

    @pose.setter
    def pose(self, value: Pose2) -> None:
        self.scan.pose = value


@dataclass(eq=False)
class Edge:
    """Relative-pose constraint between two vertices with a 3x3 information matrix."""

    from_id: int
    to_id: int
    kind: str
    relative_pose: Pose2
    information: np.ndarray

    def __post_init__(self):
        if self.from_id == self.to_id:
            raise ValueError("edge endpoints must differ")
        if self.kind not in EDGE_KINDS:
            raise ValueError(f"unknown edge kind {self.kind!r}")
        info = np.asarray(self.information, dtype=float)
        if info.shape != (3, 3):
            raise ValueError("information matrix must be 3x3")
        if not np.allclose(info, info.T, atol=1e-9):
            raise ValueError("information matrix must be symmetric")
        if np.any(np.linalg.eigvalsh(info) <= 0.0):
            raise ValueError("information matrix must be positive-definite")
        info = 0.5 * (info + info.T)
        info.flags.writeable = False
        self.information = info


class SlamGraph:
    """Pose graph covering one or more epochs; vertices keep insertion order."""

    def __init__(self, epochs=()):
        self.epochs: set[int] = set(epochs)
        self.vertices: dict[int, Vertex] = {}
        self.edges: list[Edge] = []

    def add_vertex(self, vertex: Vertex) -> None:
        if vertex.id in self.vertices:
            raise ValueError(f"duplicate vertex id {vertex.id}")
        if vertex.epoch not in self.epochs:
            raise ValueError(f"vertex epoch {vertex.epoch} not in graph epochs")
        self.vertices[vertex.id] = vertex

    def add_edge(self, edge: Edge) -> None:
        if edge.from_id not in self.vertices or edge.to_id not in self.vertices:
            raise ValueError("edge endpoint not in graph")
        self.edges.append(edge)

    def vertex_ids(self) -> list[int]:
        return list(self.vertices.keys())

    def ids_of_epoch(self, epoch: int) -> list[int]:
        return [vid for vid, v in self.vertices.items() if v.epoch == epoch]

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        adj: dict[int, list[int]] = {vid: [] for vid in self.vertices}
        for e in self.edges:
            adj[e.from_id].append(e.to_id)
            adj[e.to_id].append(e.from_id)
        seen = set()
        stack = [next(iter(self.vertices))]
        while stack:
            vid = stack.pop()
            if vid in seen:
                continue
            seen.add(vid)
            stack.extend(adj[vid])
        return len(seen) == len(self.vertices)


@dataclass(frozen=True)
class SnapshotVertex:
    epoch: int
    pose: Pose2
    scan: Scan  # endpoint geometry only; use `pose`, not scan.pose


@dataclass(frozen=True)
class GraphSnapshot:
    """Immutable view of the active graph handed to detectors.

    Poses are captured at snapshot time (Pose2 is immutable); scan endpoint
    arrays are shared because they are frozen by contract.
    """

    vertices: dict[int, SnapshotVertex]
    epochs: frozenset[int]
    current_epoch: int

    def current_ids(self) -> list[int]:
        return [vid for vid, v in self.vertices.items() if v.epoch == self.current_epoch]

    def other_ids(self) -> list[int]:
        return [vid for vid, v in self.vertices.items() if v.epoch != self.current_epoch]


@dataclass
class GraphStore:
    """Single-writer container for the active graph, inactive graphs and backups.

    Backups are canonical-serialization strings by default; when
    backup_spill_dir is set, backups at least backup_spill_bytes long are
    written to disk and the dict holds an `@file:` reference instead.
    """

    active: SlamGraph | None = None
    inactive: list[SlamGraph] = field(default_factory=list)
    backups: dict[frozenset, str] = field(default_factory=dict)
    current_epoch: int | None = None
    backup_spill_dir: str | None = None
    backup_spill_bytes: int = 1_000_000
    _next_vertex_id: int = 1
    _next_epoch_id: int = 1
    _prev_vertex_id: int | None = None  # last current-epoch vertex, odometry chain tail

    def begin_epoch(self) -> int:
        """Start a new epoch: archive the active graph (if non-empty) and open a fresh one."""
        epoch = self._next_epoch_id
        self._next_epoch_id += 1
        if self.active is not None and self.active.vertices:
            self.inactive.append(self.active)
        self.active = SlamGraph(epochs={epoch})
        self.current_epoch = epoch
        self._prev_vertex_id = None
        return epoch

    def add_vertex(self, scan: Scan, odom: Pose2, info: np.ndarray) -> int:
        """Append a scan to the active graph, chained to the previous vertex by odometry.

        The new pose is the previous current-epoch pose composed with `odom`
        (identity base for the epoch's first vertex, which gets no edge).
        """
        if self.active is None:
            raise RuntimeError("no active graph; call begin_epoch() first")
        prev = None
        if self._prev_vertex_id is not None:
            prev = self.active.vertices[self._prev_vertex_id]
        base = prev.pose if prev is not None else Pose2.identity()
        vid = self._next_vertex_id
        self._next_vertex_id += 1
        scan.pose = base.compose(odom)
        vertex = Vertex(vid, self.current_epoch, scan)
        self.active.add_vertex(vertex)
        if prev is not None:
            self.active.add_edge(Edge(prev.id, vid, "odometry", odom, info))
        self._prev_vertex_id = vid
        return vid

    def snapshot(self) -> GraphSnapshot:
        if self.active is None:
            raise RuntimeError("no active graph")
        vertices = {
            vid: SnapshotVertex(v.epoch, v.pose, v.scan)
            for vid, v in self.active.vertices.items()
        }
        return GraphSnapshot(vertices, frozenset(self.active.epochs), self.current_epoch)

    def check_invariants(self) -> None:
        """Assert the store-level invariants; used by tests and debug paths."""
        if self.active is None:
            return
        assert self.current_epoch in self.active.epochs
        sets = [frozenset(self.active.epochs)] + [frozenset(g.epochs) for g in self.inactive]
        union = set()
        for s in sets:
            assert not (union & s), "epoch sets must be pairwise disjoint"
            union |= s
        all_ids: set[int] = set()
        for g in [self.active] + self.inactive:
            dup = all_ids & set(g.vertices)
            assert not dup, f"vertex ids not globally unique: {dup}"
            all_ids |= set(g.vertices)
            for e in g.edges:
                assert e.from_id in g.vertices and e.to_id in g.vertices
            for v in g.vertices.values():
                assert v.epoch in g.epochs
