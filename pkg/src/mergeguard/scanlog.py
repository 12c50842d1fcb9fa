"""Sequence log file format (JSON Lines) and its record types.

One JSON object per line, field order fixed (frozen by golden-file tests):

  scan         {"type": "scan", "t", "odom": [dx, dy, dtheta],
                "bearing_start", "bearing_step", "range_max",
                "ranges": [r | null, ...], "truth": [x, y, theta] | null}
  epoch_break  {"type": "epoch_break", "t"}
  merge_trigger{"type": "merge_trigger", "t", "trigger", "target_epoch", "to",
                "pose": [x, y, theta], "info": [9 floats, row-major],
                "label": "correct" | "invalid"}

`ranges` holds one slot per beam on the uniform bearing grid; null marks a
beam with no return (dropped at ingestion). A standalone merge-spec file uses
the same merge_trigger objects ("type" optional).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Pose2
from .merging import MergeSpec
from .model import Scan


class ScanLogError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class ScanRecord:
    t: float
    odom: tuple[float, float, float]
    bearing_start: float
    bearing_step: float
    range_max: float
    ranges: list  # float or None per beam
    truth: tuple[float, float, float] | None = None

    def to_scan(self) -> Scan:
        bearings = [self.bearing_start + k * self.bearing_step for k in range(len(self.ranges))]
        return Scan.from_polar(Pose2.identity(), bearings, self.ranges, self.range_max)

    def odom_pose(self) -> Pose2:
        return Pose2(*self.odom)

    def truth_pose(self) -> Pose2 | None:
        return Pose2(*self.truth) if self.truth is not None else None


@dataclass
class EpochBreakRecord:
    t: float


@dataclass
class MergeTriggerRecord:
    t: float
    trigger: int
    target_epoch: int
    to_ordinal: int
    pose: tuple[float, float, float]
    info: tuple
    label: str

    def to_spec(self) -> MergeSpec:
        return MergeSpec(
            self.trigger,
            self.target_epoch,
            self.to_ordinal,
            Pose2(*self.pose),
            np.asarray(self.info, dtype=float).reshape(3, 3),
            self.label,
        )


@dataclass
class SequenceLog:
    records: list
    name: str = "sequence"

    def scan_count(self) -> int:
        return sum(1 for r in self.records if isinstance(r, ScanRecord))

    def merge_triggers(self) -> list[MergeTriggerRecord]:
        return [r for r in self.records if isinstance(r, MergeTriggerRecord)]

    def epoch_breaks(self) -> list[EpochBreakRecord]:
        return [r for r in self.records if isinstance(r, EpochBreakRecord)]


def _f(x) -> float:
    return float(x)


def record_to_json(rec) -> str:
    if isinstance(rec, ScanRecord):
        obj = {
            "type": "scan",
            "t": _f(rec.t),
            "odom": [_f(v) for v in rec.odom],
            "bearing_start": _f(rec.bearing_start),
            "bearing_step": _f(rec.bearing_step),
            "range_max": _f(rec.range_max),
            "ranges": [None if r is None else _f(r) for r in rec.ranges],
            "truth": None if rec.truth is None else [_f(v) for v in rec.truth],
        }
    elif isinstance(rec, EpochBreakRecord):
        obj = {"type": "epoch_break", "t": _f(rec.t)}
    elif isinstance(rec, MergeTriggerRecord):
        obj = {
            "type": "merge_trigger",
            "t": _f(rec.t),
            "trigger": int(rec.trigger),
            "target_epoch": int(rec.target_epoch),
            "to": int(rec.to_ordinal),
            "pose": [_f(v) for v in rec.pose],
            "info": [_f(v) for v in rec.info],
            "label": rec.label,
        }
    else:
        raise TypeError(f"unknown record type {type(rec)!r}")
    return json.dumps(obj)


def write_log(log: SequenceLog, path) -> None:
    with open(path, "w") as fh:
        for rec in log.records:
            fh.write(record_to_json(rec) + "\n")


def _parse_merge_obj(obj: dict, lineno: int) -> MergeTriggerRecord:
    try:
        pose = tuple(float(v) for v in obj["pose"])
        info = tuple(float(v) for v in obj["info"])
        if len(pose) != 3:
            raise ScanLogError(lineno, "pose must have 3 entries")
        if len(info) != 9:
            raise ScanLogError(lineno, "info must have 9 entries")
        rec = MergeTriggerRecord(
            float(obj.get("t", 0.0)),
            int(obj["trigger"]),
            int(obj["target_epoch"]),
            int(obj["to"]),
            pose,
            info,
            str(obj["label"]),
        )
    except KeyError as exc:
        raise ScanLogError(lineno, f"missing field {exc}") from exc
    if rec.label not in ("correct", "invalid"):
        raise ScanLogError(lineno, f"bad label {rec.label!r}")
    return rec


def read_log(path) -> SequenceLog:
    """Parse a scan log; malformed records raise ScanLogError with the line number."""
    path = Path(path)
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScanLogError(lineno, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or "type" not in obj:
                raise ScanLogError(lineno, "record must be an object with a 'type' field")
            kind = obj["type"]
            try:
                if kind == "scan":
                    odom = tuple(float(v) for v in obj["odom"])
                    if len(odom) != 3:
                        raise ScanLogError(lineno, "odom must have 3 entries")
                    truth = obj.get("truth")
                    records.append(
                        ScanRecord(
                            float(obj["t"]),
                            odom,
                            float(obj["bearing_start"]),
                            float(obj["bearing_step"]),
                            float(obj["range_max"]),
                            [None if r is None else float(r) for r in obj["ranges"]],
                            None if truth is None else tuple(float(v) for v in truth),
                        )
                    )
                elif kind == "epoch_break":
                    records.append(EpochBreakRecord(float(obj["t"])))
                elif kind == "merge_trigger":
                    records.append(_parse_merge_obj(obj, lineno))
                else:
                    raise ScanLogError(lineno, f"unknown record type {kind!r}")
            except ScanLogError:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise ScanLogError(lineno, f"malformed {kind} record: {exc}") from exc
    return SequenceLog(records, name=path.stem)


def read_merge_specs(path) -> list[MergeSpec]:
    """Standalone merge-spec file: JSONL of merge_trigger objects ('type' optional)."""
    specs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScanLogError(lineno, f"invalid JSON: {exc.msg}") from exc
            if obj.get("type", "merge_trigger") != "merge_trigger":
                raise ScanLogError(lineno, "merge-spec records must be merge_trigger objects")
            specs.append(_parse_merge_obj(obj, lineno).to_spec())
    return specs
