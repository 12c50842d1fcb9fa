"""Evaluation pipeline: replay sequence logs, score detectors, sweep ROC curves.

The front end is deliberately plain: vertices chain on (noisy) logged odometry,
with ground-truth loop closures injected inside an epoch so drift stays small
enough not to confound the detectors. Forced merges come from merge_trigger
records (or a standalone merge-spec file). Evaluation mode never unmerges and
records each detector's maximum score per sequence; live mode unmerges on the
first alarm and emits an event stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import Config, lc_information, odom_information
from .merging import MergeDirector, MergeSpec, merge, unmerge
from .model import Edge, GraphStore
from .optimize import optimize
from .scanlog import EpochBreakRecord, MergeTriggerRecord, ScanRecord, SequenceLog


@dataclass
class SequenceResult:
    sequence_id: str
    label: str
    max_score: dict = field(default_factory=dict)       # detector -> max over updates
    mean_ms: dict = field(default_factory=dict)         # detector -> mean update cost
    first_alarm: dict = field(default_factory=dict)     # detector -> ordinal or None
    n_updates: int = 0


@dataclass
class LiveEvent:
    kind: str  # merge_applied | alarm | unmerge_done
    ordinal: int
    vertex_id: int
    detector: str = ""
    score: float = 0.0


class _Frontend:
    """Replays one log into a GraphStore, notifying the director of each vertex."""

    def __init__(self, cfg: Config, director: MergeDirector):
        self.cfg = cfg
        self.store = GraphStore()
        self.director = director
        self.truths: list = []  # ground-truth pose per ordinal (may contain None)
        self.vid_of_ordinal: list[int] = []
        self._since_lc = 0

    def on_epoch_break(self) -> None:
        self.store.begin_epoch()
        self._since_lc = 0

    def add_scan(self, ordinal: int, rec: ScanRecord) -> int:
        if self.store.active is None:
            self.store.begin_epoch()
        scan = rec.to_scan()
        vid = self.store.add_vertex(scan, rec.odom_pose(), odom_information(self.cfg))
        self.truths.append(rec.truth_pose())
        self.vid_of_ordinal.append(vid)
        self.director.note_vertex(ordinal, vid, self.store.current_epoch)
        self._maybe_loop_close(ordinal, vid)
        return vid

    def _maybe_loop_close(self, ordinal: int, vid: int) -> None:
        fc = self.cfg.frontend
        self._since_lc += 1
        if self._since_lc < fc.lc_stride:
            return
        truth = self.truths[ordinal]
        if truth is None:
            return
        epoch = self.store.current_epoch
        best = None
        best_d = fc.lc_radius
        for other_ord, other_vid in enumerate(self.vid_of_ordinal[: ordinal - fc.lc_min_gap + 1]):
            v = self.store.active.vertices.get(other_vid)
            if v is None or v.epoch != epoch:
                continue
            other_truth = self.truths[other_ord]
            if other_truth is None:
                continue
            d = math.hypot(other_truth.x - truth.x, other_truth.y - truth.y)
            if d <= best_d:
                best, best_d = (other_vid, other_truth), d
        if best is None:
            return
        other_vid, other_truth = best
        rel = other_truth.relative_to(truth)
        self.store.active.add_edge(
            Edge(other_vid, vid, "loop_closure", rel, lc_information(self.cfg))
        )
        first = next(iter(self.store.active.ids_of_epoch(epoch)))
        optimize(
            self.store.active,
            {first},
            max_iters=self.cfg.frontend.opt_max_iters,
            tol=self.cfg.frontend.opt_tol,
        )
        self._since_lc = 0


def _drive(
    log: SequenceLog,
    detectors: list,
    cfg: Config,
    live: bool,
    extra_specs: list[MergeSpec] | None = None,
):
    """Shared driver for evaluation and live mode."""
    specs = [rec.to_spec() for rec in log.merge_triggers()]
    if extra_specs:
        specs += extra_specs
    director = MergeDirector(specs)
    fe = _Frontend(cfg, director)

    result = SequenceResult(log.name, _sequence_label(specs) if specs else "correct")
    events: list[LiveEvent] = []
    scores: dict[str, list[float]] = {d.name: [] for d in detectors}
    times: dict[str, list[float]] = {d.name: [] for d in detectors}

    ordinal = -1
    for rec in log.records:
        if isinstance(rec, EpochBreakRecord):
            fe.on_epoch_break()
            continue
        if isinstance(rec, MergeTriggerRecord):
            continue  # handled through the director after its trigger vertex
        if not isinstance(rec, ScanRecord):
            raise TypeError(f"unexpected record {type(rec)!r}")
        ordinal += 1
        vid = fe.add_scan(ordinal, rec)

        for idx, edges, _spec in director.candidates(fe.store, ordinal):
            merge(
                fe.store, idx, edges,
                max_iters=cfg.frontend.opt_max_iters, tol=cfg.frontend.opt_tol,
            )
            snap = fe.store.snapshot()
            for det in detectors:
                det.on_merge(snap)
            if live:
                events.append(LiveEvent("merge_applied", ordinal, vid))

        if len(fe.store.active.epochs) < 2:
            continue
        snap = fe.store.snapshot()
        result.n_updates += 1
        alarm_det = None
        for det in detectors:
            report = det.update(snap, vid)
            scores[det.name].append(report.score)
            times[det.name].append(report.compute_ms)
            if report.alarm and result.first_alarm.get(det.name) is None:
                result.first_alarm[det.name] = ordinal
            if live and report.alarm and alarm_det is None:
                alarm_det = (det.name, report.score)
        if live and alarm_det is not None:
            events.append(LiveEvent("alarm", ordinal, vid, alarm_det[0], alarm_det[1]))
            unmerge(fe.store, max_iters=cfg.frontend.opt_max_iters, tol=cfg.frontend.opt_tol)
            for det in detectors:
                det.on_unmerge()
            events.append(LiveEvent("unmerge_done", ordinal, vid))

    for name, vals in scores.items():
        result.max_score[name] = max(vals) if vals else 0.0
        result.mean_ms[name] = (sum(times[name]) / len(times[name])) if times[name] else 0.0
        result.first_alarm.setdefault(name, None)
    return result, events, fe.store


def _sequence_label(specs: list[MergeSpec]) -> str:
    labels = {s.label for s in specs}
    if len(labels) > 1:
        raise ValueError("sequence mixes correct and invalid merges; no single label")
    return labels.pop()


def run_sequence(
    log: SequenceLog,
    detectors: list,
    cfg: Config,
    extra_specs: list[MergeSpec] | None = None,
) -> SequenceResult:
    """Evaluation mode: merges applied, unmerge suppressed, max scores recorded."""
    if not log.merge_triggers() and not extra_specs:
        raise ValueError("sequence log contains no forced merge")
    result, _events, _store = _drive(log, detectors, cfg, live=False, extra_specs=extra_specs)
    return result


def live_mode(
    log: SequenceLog,
    detectors: list,
    cfg: Config,
    extra_specs: list[MergeSpec] | None = None,
) -> list[LiveEvent]:
    """Deployment path: alarms trigger an unmerge; returns the event stream."""
    _result, events, _store = _drive(log, detectors, cfg, live=True, extra_specs=extra_specs)
    return events


@dataclass
class RocCurve:
    detector: str
    points: list  # (fpr, tpr), from (0, 0) to (1, 1)
    auc: float
    thresholds: list = field(default_factory=list)  # threshold per point (inf first)


def compute_roc(results: list[SequenceResult], detector: str) -> RocCurve:
    """Threshold sweep over all distinct max scores; positive class = invalid merge.

    A sequence alarms at threshold t when its max score >= t. The AUC integer
    trapezoid numerator over TP/FP counts equals the pairwise concordance count,
    so the division by 2*P*N is float-exact against the concordance oracle.
    """
    labeled = [(r.max_score[detector], r.label == "invalid") for r in results]
    pos = sum(1 for _s, inv in labeled if inv)
    neg = len(labeled) - pos
    if pos == 0 or neg == 0:
        raise ValueError("ROC needs both correct and invalid sequences")
    thresholds = sorted({s for s, _ in labeled}, reverse=True)
    points = [(0.0, 0.0)]
    out_thresholds = [math.inf]
    tp = fp = 0
    prev_tp = prev_fp = 0
    num = 0  # sum of dFP * (TP_k + TP_k+1): twice the trapezoid area in counts
    for t in thresholds:
        tp = sum(1 for s, inv in labeled if inv and s >= t)
        fp = sum(1 for s, inv in labeled if not inv and s >= t)
        num += (fp - prev_fp) * (tp + prev_tp)
        prev_tp, prev_fp = tp, fp
        points.append((fp / neg, tp / pos))
        out_thresholds.append(t)
    if points[-1] != (1.0, 1.0):  # all-alarm endpoint (reached at the min threshold)
        num += (neg - prev_fp) * (pos + prev_tp)
        points.append((1.0, 1.0))
        out_thresholds.append(-math.inf)
    auc = num / (2 * pos * neg)
    return RocCurve(detector, points, auc, out_thresholds)
