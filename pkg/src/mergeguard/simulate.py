"""Synthetic 2-D environments with lidar raycasting, odometry noise and kidnaps.

Worlds are sets of wall segments, so raycasting is exact. A trajectory script
walks waypoints at constant speed, can teleport the robot (kidnap -> epoch
break) and schedules forced merges. An invalid merge is expressed as a rigid
world-frame error transform W folded into the ground-truth relative pose
(W = identity means the merge is correct).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2
from .model import Scan
from .scanlog import EpochBreakRecord, MergeTriggerRecord, ScanRecord, SequenceLog

DEFAULT_MERGE_INFO = tuple(np.diag([100.0, 100.0, 400.0]).ravel())


@dataclass
class World:
    """Wall segments (N, 4) as (x1, y1, x2, y2), plus named poses for scripting."""

    segments: np.ndarray
    places: dict = field(default_factory=dict)

    def __post_init__(self):
        self.segments = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        lengths = np.hypot(
            self.segments[:, 2] - self.segments[:, 0],
            self.segments[:, 3] - self.segments[:, 1],
        )
        if np.any(~np.isfinite(self.segments)) or np.any(lengths <= 0.0):
            raise ValueError("wall segments must be finite and non-degenerate")


@dataclass
class SensorModel:
    beam_count: int = 360
    span: float = 2.0 * math.pi
    range_max: float = 10.0
    range_sigma: float = 0.01
    odom_sigma: tuple[float, float, float] = (0.004, 0.004, 0.002)

    def __post_init__(self):
        if self.beam_count < 2:
            raise ValueError("beam_count must be >= 2")
        if self.range_sigma < 0 or any(s < 0 for s in self.odom_sigma):
            raise ValueError("noise sigmas must be non-negative")

    def bearings(self) -> np.ndarray:
        step = self.span / self.beam_count
        start = -self.span / 2.0 + step / 2.0
        return start + step * np.arange(self.beam_count)


@dataclass
class KidnapEvent:
    waypoint_index: int
    teleport: Pose2


@dataclass
class ForcedMerge:
    """Scheduled merge: fires after the scan with sequence ordinal `trigger`.

    `world_error` is the rigid error transform W; the emitted relative pose is
    T = truth(trigger)^-1 * W * truth(target). Identity W = correct merge.
    """

    trigger: int
    target_epoch: int
    to_ordinal: int
    world_error: Pose2
    label: str
    info: tuple = DEFAULT_MERGE_INFO


@dataclass
class TrajectoryScript:
    waypoints: list
    speed: float = 0.5  # m/s
    rate: float = 5.0  # scans/s
    kidnaps: list = field(default_factory=list)
    merges: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("a script needs at least two waypoints")


def ray_segment_hits(origin: np.ndarray, directions: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Distance to the nearest wall per ray direction; inf where nothing is hit."""
    p = segments[:, 0:2]
    d_seg = segments[:, 2:4] - p
    rel = p - origin  # (S, 2)
    # solve origin + t*dir = p + u*seg per (ray, segment) via 2x2 cross products
    denom = directions[:, 0:1] * d_seg[:, 1] - directions[:, 1:2] * d_seg[:, 0]  # (B, S)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rel[:, 0] * d_seg[:, 1] - rel[:, 1] * d_seg[:, 0]) / denom
        u = (directions[:, 0:1] * rel[:, 1][None, :] - directions[:, 1:2] * rel[:, 0][None, :])
        u = -u / denom
    valid = (np.abs(denom) > 1e-302) & (t > 1e-9) & (u >= 0.0) & (u <= 1.0)
    t = np.where(valid, t, np.inf)
    return t.min(axis=1)


def raycast(world: World, pose: Pose2, sensor: SensorModel, rng=None) -> Scan:
    """Simulate one sweep; beams without a wall hit inside range_max are dropped."""
    bearings = sensor.bearings()
    angles = pose.theta + bearings
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    dist = ray_segment_hits(np.array([pose.x, pose.y]), directions, world.segments)
    hit = np.isfinite(dist) & (dist <= sensor.range_max)
    ranges = dist[hit]
    if rng is not None and sensor.range_sigma > 0.0:
        ranges = ranges + rng.normal(0.0, sensor.range_sigma, ranges.shape)
        ranges = np.clip(ranges, 1e-6, sensor.range_max)
    return Scan(pose, bearings[hit], ranges, sensor.range_max)


def _ranges_on_grid(world: World, pose: Pose2, sensor: SensorModel, rng) -> list:
    """Per-beam range list aligned to the sensor's bearing grid (None = no hit)."""
    bearings = sensor.bearings()
    angles = pose.theta + bearings
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    dist = ray_segment_hits(np.array([pose.x, pose.y]), directions, world.segments)
    out = []
    for d in dist:
        if not math.isfinite(d) or d > sensor.range_max:
            out.append(None)
            continue
        if sensor.range_sigma > 0.0:
            d = float(np.clip(d + rng.normal(0.0, sensor.range_sigma), 1e-6, sensor.range_max))
        out.append(float(d))
    return out


def _walk(script: TrajectoryScript):
    """True poses along the waypoint polyline, with epoch-break flags at kidnaps."""
    kidnap_at = {k.waypoint_index: k.teleport for k in script.kidnaps}
    step_len = script.speed / script.rate
    poses: list[Pose2] = []
    breaks: set[int] = set()  # indices into poses where a new epoch starts
    wp = list(script.waypoints)
    current = wp[0]
    poses.append(current)
    for i in range(1, len(wp)):
        target = wp[i]
        dx = target.x - current.x
        dy = target.y - current.y
        dist = math.hypot(dx, dy)
        if dist > 1e-9:
            heading = math.atan2(dy, dx)
            n_steps = max(1, int(math.ceil(dist / step_len)))
            for s in range(1, n_steps + 1):
                f = s / n_steps
                poses.append(Pose2(current.x + f * dx, current.y + f * dy, heading))
        current = poses[-1]
        if i in kidnap_at:
            current = kidnap_at[i]
            breaks.add(len(poses))
            poses.append(current)
    return poses, breaks


def run_scenario(
    world: World, script: TrajectoryScript, sensor: SensorModel, seed: int
) -> SequenceLog:
    """Deterministic synthetic sequence log for (world, script, sensor, seed)."""
    rng = np.random.default_rng(seed)
    poses, breaks = _walk(script)
    merge_by_trigger = {m.trigger: m for m in script.merges}

    records = []
    epoch_of_scan: list[int] = []
    epoch = 1
    prev: Pose2 | None = None
    ordinal = 0
    for k, pose in enumerate(poses):
        t = k / script.rate
        if k in breaks:
            records.append(EpochBreakRecord(t))
            epoch += 1
            prev = None
        if prev is None:
            odom = (0.0, 0.0, 0.0)
        else:
            delta = prev.relative_to(pose)
            noise = rng.normal(0.0, sensor.odom_sigma, 3)
            odom = (delta.x + noise[0], delta.y + noise[1], delta.theta + noise[2])
        ranges = _ranges_on_grid(world, pose, sensor, rng)
        step = sensor.span / sensor.beam_count
        records.append(
            ScanRecord(
                t,
                odom,
                float(-sensor.span / 2.0 + step / 2.0),
                float(step),
                sensor.range_max,
                ranges,
                (pose.x, pose.y, pose.theta),
            )
        )
        epoch_of_scan.append(epoch)
        prev = pose
        if ordinal in merge_by_trigger:
            m = merge_by_trigger[ordinal]
            target_ordinals = [i for i, e in enumerate(epoch_of_scan) if e == m.target_epoch]
            if not (0 <= m.to_ordinal < len(target_ordinals)):
                raise ValueError(
                    f"merge to_ordinal {m.to_ordinal} out of range for epoch {m.target_epoch}"
                )
            target_pose = poses[target_ordinals[m.to_ordinal]]
            rel = pose.inverse().compose(m.world_error).compose(target_pose)
            records.append(
                MergeTriggerRecord(
                    t,
                    ordinal,
                    m.target_epoch,
                    m.to_ordinal,
                    (rel.x, rel.y, rel.theta),
                    tuple(float(v) for v in m.info),
                    m.label,
                )
            )
        ordinal += 1
    return SequenceLog(records)
