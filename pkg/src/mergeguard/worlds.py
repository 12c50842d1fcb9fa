"""Scenario library: scripted toy worlds and a randomized flat generator.

Ships the three scripted environments used throughout the tests — a four-way
crossing connecting three rooms (risky rotated merge), an ambiguous twin
corridor (aliased merge detected once the robot reaches the differing end),
and a near-symmetric room (180-degree merge, deliberately hard) — plus a
randomized flat generator for bulk ROC sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2, rotation_about
from .simulate import ForcedMerge, KidnapEvent, SensorModel, TrajectoryScript, World, _walk


def hwall(x0: float, x1: float, y: float) -> tuple:
    return (x0, y, x1, y)


def vwall(x: float, y0: float, y1: float) -> tuple:
    return (x, y0, x, y1)


def box(cx: float, cy: float, w: float, h: float) -> list:
    x0, x1 = cx - w / 2.0, cx + w / 2.0
    y0, y1 = cy - h / 2.0, cy + h / 2.0
    return [hwall(x0, x1, y0), hwall(x0, x1, y1), vwall(x0, y0, y1), vwall(x1, y0, y1)]


@dataclass
class Scenario:
    """A runnable scripted scenario with its ground-truth merge label."""

    name: str
    world: World
    script: TrajectoryScript
    sensor: SensorModel
    label: str


def _scan_ordinal_near(script: TrajectoryScript, x: float, y: float, epoch: int) -> int:
    """Sequence ordinal of the scan closest to (x, y) among the given epoch's scans."""
    poses, breaks = _walk(script)
    ep = 1
    best, best_d = None, math.inf
    for k, p in enumerate(poses):
        if k in breaks:
            ep += 1
        if ep != epoch:
            continue
        d = math.hypot(p.x - x, p.y - y)
        if d < best_d:
            best, best_d = k, d
    if best is None:
        raise ValueError(f"script has no scans in epoch {epoch}")
    return best


def _epoch_ordinal(script: TrajectoryScript, sequence_ordinal: int) -> int:
    """Convert a sequence ordinal into an ordinal within its own epoch."""
    poses, breaks = _walk(script)
    start = 0
    for k in sorted(breaks):
        if k <= sequence_ordinal:
            start = k
    return sequence_ordinal - start


def four_way_crossing_world() -> World:
    segs = [
        # The crossing itself aliases under rotation, but the arms differ:
        # north/south arms are 2.0 m wide, east/west arms 2.4 m, and room A is
        # narrower but deeper than room B, so a 90-degree merge criss-crosses.
        # north arm into room A [-2, 2.7] x [6, 10.6]
        vwall(-1, 1.2, 6), vwall(1, 1.2, 6),
        hwall(-2, -1, 6), hwall(1, 2.7, 6),
        hwall(-2, 2.7, 10.6), vwall(-2, 6, 10.6), vwall(2.7, 6, 10.6),
        # east arm into room B [5, 8.6] x [-1.6, 1.6]; an entry baffle just
        # inside the door forces a turn and blocks the corridor sight line
        hwall(1, 5, 1.2), hwall(1, 5, -1.2),
        vwall(5, 1.2, 1.6), vwall(5, -1.6, -1.2),
        hwall(5, 8.6, 1.6), hwall(5, 8.6, -1.6), vwall(8.6, -1.6, 1.6),
        vwall(5.6, -0.6, 1.2),
        # west arm into room C [-9.5, -5.5] x [-3, 3]
        hwall(-5.5, -1, 1.2), hwall(-5.5, -1, -1.2),
        vwall(-5.5, 1.2, 3), vwall(-5.5, -3, -1.2),
        hwall(-9.5, -5.5, 3), hwall(-9.5, -5.5, -3), vwall(-9.5, -3, 3),
        # south arm, dead end
        vwall(-1, -4, -1.2), vwall(1, -4, -1.2), hwall(-1, 1, -4),
    ]
    # asymmetric furniture placed so a rotated merge lands boxes in free space
    segs += box(1.0, 7.2, 1.3, 1.1)   # room A; rotates onto the middle of room B
    segs += box(0.9, 8.55, 1.0, 0.7)
    segs += box(1.8, 9.6, 0.8, 0.8)
    segs += box(-1.3, 9.0, 0.8, 0.8)
    segs += box(7.9, -1.15, 0.6, 0.5)  # room B
    segs += box(5.9, 1.1, 0.8, 0.6)
    segs += box(7.0, 0.95, 0.7, 0.5)
    segs += box(6.6, -1.25, 0.6, 0.5)
    places = {
        "crossing": Pose2(0, 0, 0),
        "room_a": Pose2(0.5, 7.5, math.pi / 2),
        "room_b": Pose2(7, 0, math.pi),
        "room_c": Pose2(-7.5, 0, 0),
    }
    return World(np.array(segs), places)


def four_way_crossing_scenario(invalid: bool) -> Scenario:
    world = four_way_crossing_world()
    waypoints = [
        Pose2(7.0, 0.3, math.pi),  # room B
        Pose2(6.0, -0.9, math.pi),
        Pose2(5.2, -0.95, math.pi),  # around the entry baffle
        Pose2(3.5, -0.15, math.pi),
        Pose2(0, 0, math.pi / 2),
        Pose2(0, 4, math.pi / 2),
        Pose2(-0.8, 7.0, math.pi / 2),  # room A, west side (furniture sits east)
        Pose2(-1.0, 8.2, math.pi / 2),  # kidnap happens here
        Pose2(-2.5, 0, 0),
        Pose2(-0.5, 0, 0),
        # after the merge: east through the arm into room B, where a rotated
        # merge has claimed contradicting geometry
        Pose2(3.0, -0.1, 0),
        Pose2(5.3, -0.95, 0),
        Pose2(6.2, -0.95, 0),
        Pose2(7.4, -0.7, 0),
        Pose2(7.4, 0.5, 0),
        Pose2(6.2, 0.6, 0),
    ]
    script = TrajectoryScript(
        waypoints,
        speed=1.0,
        rate=4.0,
        kidnaps=[KidnapEvent(7, Pose2(-7.5, 0.3, 0))],
    )
    trigger = _scan_ordinal_near(script, -0.8, 0.0, epoch=2)
    to_seq = _scan_ordinal_near(script, 1.2, 0.0, epoch=1)
    w = rotation_about(0.0, 0.0, -math.pi / 2) if invalid else Pose2.identity()
    script.merges = [
        ForcedMerge(trigger, 1, _epoch_ordinal(script, to_seq), w,
                    "invalid" if invalid else "correct")
    ]
    name = "crossing_rot90" if invalid else "crossing_correct"
    return Scenario(name, world, script, SensorModel(), "invalid" if invalid else "correct")


def twin_corridor_world() -> World:
    segs = [
        # corridor 1: x in [0, 16], y in [0, 2]; east end opens into a room
        vwall(0, 0, 2), hwall(0, 16, 0), hwall(0, 16, 2),
        vwall(16, -1, 0), vwall(16, 2, 3),
        hwall(16, 20, -1), hwall(16, 20, 3), vwall(20, -1, 3),
        # corridor 2: identical cross-section at y in [8, 10], but two meters
        # shorter, dead-ended, with an alcove and a pillar near the end
        vwall(0, 8, 10), hwall(0, 11.0, 8), hwall(12.2, 14, 8), hwall(0, 14, 10),
        vwall(14, 8, 10),
        vwall(11.0, 6.0, 8), vwall(12.2, 6.0, 8), hwall(11.0, 12.2, 6.0),
    ]
    segs += box(12.8, 9.2, 0.5, 0.5)  # pillar in corridor 2 only
    places = {"corridor1": Pose2(1, 1, 0), "corridor2": Pose2(1, 9, 0)}
    return World(np.array(segs), places)


def twin_corridor_scenario(invalid: bool) -> Scenario:
    world = twin_corridor_world()
    start2 = Pose2(1.0, 9.0, 0) if invalid else Pose2(1.0, 1.0, 0)
    y2 = 9.0 if invalid else 1.0
    waypoints = [
        Pose2(1.0, 1.0, 0),
        Pose2(15.0, 1.0, 0),
        Pose2(18.0, 1.0, 0),   # into the room
        Pose2(15.5, 0.8, 0),   # kidnap happens here
        Pose2(4.5, y2, 0),
        Pose2(13.0, y2, 0),
    ]
    script = TrajectoryScript(
        waypoints,
        speed=1.0,
        rate=4.0,
        kidnaps=[KidnapEvent(3, start2)],
    )
    trigger = _scan_ordinal_near(script, 3.5, y2, epoch=2)
    to_seq = _scan_ordinal_near(script, 2.5, 1.0, epoch=1)
    if invalid:
        # the alias: corridor-1 content claimed to lie in corridor 2, with the
        # small rotation error a real relocalization mistake would carry
        w = rotation_about(3.5, 9.0, 0.09).compose(Pose2(0.0, 8.0, 0.0))
    else:
        w = Pose2.identity()
    script.merges = [
        ForcedMerge(trigger, 1, _epoch_ordinal(script, to_seq), w,
                    "invalid" if invalid else "correct")
    ]
    name = "twin_corridor_invalid" if invalid else "twin_corridor_correct"
    return Scenario(name, world, script, SensorModel(), "invalid" if invalid else "correct")


def symmetric_room_world() -> World:
    segs = [
        hwall(0, 8, 0), hwall(0, 8, 5), vwall(0, 0, 5), vwall(8, 0, 5),
    ]
    segs += box(2.0, 1.5, 0.6, 0.6)  # symmetric pillar pair
    segs += box(6.0, 3.5, 0.6, 0.6)
    segs += box(6.9, 0.9, 1.4, 1.0)  # the asymmetry a 180-degree merge trips over
    return World(np.array(segs), {"center": Pose2(4, 2.5, 0)})


def symmetric_room_scenario(invalid: bool) -> Scenario:
    world = symmetric_room_world()
    waypoints = [
        Pose2(1.0, 3.8, 0),
        Pose2(4.0, 4.2, 0),
        Pose2(7.0, 3.8, 0),
        Pose2(6.5, 4.0, 0),    # kidnap happens here
        Pose2(3.5, 3.6, 0),
        Pose2(1.2, 2.6, 0),
        Pose2(4.0, 1.2, 0),
    ]
    script = TrajectoryScript(
        waypoints,
        speed=0.8,
        rate=4.0,
        kidnaps=[KidnapEvent(3, Pose2(5.4, 3.9, math.pi))],
    )
    trigger = _scan_ordinal_near(script, 4.2, 3.7, epoch=2)
    to_seq = _scan_ordinal_near(script, 4.0, 4.0, epoch=1)
    w = rotation_about(4.0, 2.5, math.pi) if invalid else Pose2.identity()
    script.merges = [
        ForcedMerge(trigger, 1, _epoch_ordinal(script, to_seq), w,
                    "invalid" if invalid else "correct")
    ]
    name = "symmetric_room_180" if invalid else "symmetric_room_correct"
    return Scenario(name, world, script, SensorModel(), "invalid" if invalid else "correct")


def _segment_point_distance(p, a, b) -> float:
    ab = (b[0] - a[0], b[1] - a[1])
    ap = (p[0] - a[0], p[1] - a[1])
    denom = ab[0] ** 2 + ab[1] ** 2
    t = 0.0 if denom == 0 else max(0.0, min(1.0, (ap[0] * ab[0] + ap[1] * ab[1]) / denom))
    cx, cy = a[0] + t * ab[0], a[1] + t * ab[1]
    return math.hypot(p[0] - cx, p[1] - cy)


def random_flat_scenario(seed: int, invalid: bool) -> Scenario:
    """Randomized 2x2-room flat with doors, furniture, a kidnap and one merge."""
    rng = np.random.default_rng(seed)
    w = float(rng.uniform(10.0, 14.0))
    h = float(rng.uniform(8.0, 11.0))
    xs = float(rng.uniform(0.4 * w, 0.6 * w))  # vertical split
    ys = float(rng.uniform(0.4 * h, 0.6 * h))  # horizontal split
    door = 1.3

    def split_with_doors(fixed, lo, hi, door_at, vertical):
        a = (fixed, lo, fixed, door_at - door / 2) if vertical else (lo, fixed, door_at - door / 2, fixed)
        b = (fixed, door_at + door / 2, fixed, hi) if vertical else (door_at + door / 2, fixed, hi, fixed)
        return [a, b]

    dv1 = float(rng.uniform(0.25 * ys, 0.75 * ys))          # door in lower half of x-split
    dv2 = float(rng.uniform(ys + 0.25 * (h - ys), ys + 0.75 * (h - ys)))
    dh1 = float(rng.uniform(0.25 * xs, 0.75 * xs))          # door in left half of y-split
    dh2 = float(rng.uniform(xs + 0.25 * (w - xs), xs + 0.75 * (w - xs)))
    segs = [hwall(0, w, 0), hwall(0, w, h), vwall(0, 0, h), vwall(w, 0, h)]
    segs += split_with_doors(xs, 0, ys, dv1, vertical=True)
    segs += split_with_doors(xs, ys, h, dv2, vertical=True)
    segs += split_with_doors(ys, 0, xs, dh1, vertical=False)
    segs += split_with_doors(ys, xs, w, dh2, vertical=False)

    rooms = {  # centers of the four rooms
        "sw": (xs / 2, ys / 2),
        "se": ((xs + w) / 2, ys / 2),
        "nw": (xs / 2, (ys + h) / 2),
        "ne": ((xs + w) / 2, (ys + h) / 2),
    }
    doors = {
        ("sw", "se"): (xs, dv1),
        ("nw", "ne"): (xs, dv2),
        ("sw", "nw"): (dh1, ys),
        ("se", "ne"): (dh2, ys),
    }

    def leg(a, b):
        key = (a, b) if (a, b) in doors else (b, a)
        return [rooms[a], doors[key], rooms[b]]

    # rooms are adjacent along the cycle sw-se-ne-nw; pick a random 3-room walk
    cycle = ["sw", "se", "ne", "nw"]
    start = int(rng.integers(0, 4))
    direction = 1 if rng.random() < 0.5 else -1
    order = [cycle[(start + i * direction) % 4] for i in range(3)]
    # epoch 1 tours three rooms; epoch 2 walks back through two of them
    e1 = leg(order[0], order[1])[:-1] + leg(order[1], order[2])
    e2_rooms = (order[2], order[1])
    e2 = leg(order[2], order[1])[:-1] + leg(order[1], order[0])

    path_pts = [*e1, *e2]
    path_segs = list(zip(path_pts[:-1], path_pts[1:]))

    # furniture kept clear of the walked path
    for _ in range(int(rng.integers(2, 5))):
        for _attempt in range(30):
            cx = float(rng.uniform(1.0, w - 1.0))
            cy = float(rng.uniform(1.0, h - 1.0))
            size = float(rng.uniform(0.4, 0.9))
            if all(_segment_point_distance((cx, cy), a, b) > size / 2 + 0.8 for a, b in path_segs):
                segs += box(cx, cy, size, size)
                break

    waypoints = [Pose2(x, y, 0) for x, y in e1]
    kidnap_index = len(waypoints) - 1
    e2_start = Pose2(e2[0][0] + 0.3, e2[0][1] + 0.2, float(rng.uniform(-math.pi, math.pi)))
    waypoints += [Pose2(x, y, 0) for x, y in e2]
    script = TrajectoryScript(
        waypoints,
        speed=1.0,
        rate=4.0,
        kidnaps=[KidnapEvent(kidnap_index, e2_start)],
    )

    trig_xy = doors[(e2_rooms if e2_rooms in doors else (e2_rooms[1], e2_rooms[0]))]
    trigger = _scan_ordinal_near(script, trig_xy[0], trig_xy[1], epoch=2)
    to_seq = _scan_ordinal_near(script, trig_xy[0], trig_xy[1], epoch=1)
    if invalid:
        poses, _ = _walk(script)
        at = poses[trigger]
        kind = int(rng.integers(0, 3))
        if kind == 0:
            w_err = rotation_about(at.x, at.y, float(rng.choice([-1, 1])) * math.pi / 2)
        elif kind == 1:
            w_err = rotation_about(at.x, at.y, math.pi)
        else:
            ang = float(rng.uniform(-0.6, 0.6))
            w_err = rotation_about(at.x, at.y, ang).compose(
                Pose2(float(rng.uniform(1.2, 2.5)) * float(rng.choice([-1, 1])),
                      float(rng.uniform(-1.0, 1.0)), 0.0)
            )
    else:
        w_err = Pose2.identity()
    script.merges = [
        ForcedMerge(trigger, 1, _epoch_ordinal(script, to_seq), w_err,
                    "invalid" if invalid else "correct")
    ]
    name = f"flat{seed}_{'invalid' if invalid else 'correct'}"
    return Scenario(name, World(np.array(segs)), script, SensorModel(), script.merges[0].label)


SCRIPTED = {
    "crossing_correct": lambda: four_way_crossing_scenario(False),
    "crossing_rot90": lambda: four_way_crossing_scenario(True),
    "twin_corridor_correct": lambda: twin_corridor_scenario(False),
    "twin_corridor_invalid": lambda: twin_corridor_scenario(True),
    "symmetric_room_correct": lambda: symmetric_room_scenario(False),
    "symmetric_room_180": lambda: symmetric_room_scenario(True),
}


def roc_suite(n_sequences: int = 60, seed: int = 0) -> list[Scenario]:
    """Balanced evaluation suite: the six scripted scenarios plus random flats."""
    scenarios = [build() for build in SCRIPTED.values()]
    k = 0
    while len(scenarios) < n_sequences:
        scenarios.append(random_flat_scenario(seed * 10007 + k, invalid=(k % 2 == 1)))
        k += 1
    return scenarios
