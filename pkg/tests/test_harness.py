import math

import numpy as np
import pytest

from mergeguard.config import Config
from mergeguard.detectors import make_detector
from mergeguard.harness import SequenceResult, compute_roc, live_mode, run_sequence
from mergeguard.reports import emit_reports, read_results_csv
from mergeguard.simulate import run_scenario
from mergeguard.worlds import SCRIPTED, twin_corridor_scenario

from oracles import auc_concordance


def result_with(seq_id, label, score, detector="change"):
    r = SequenceResult(seq_id, label)
    r.max_score[detector] = score
    r.mean_ms[detector] = 1.0
    return r


# --- compute_roc ---------------------------------------------------------------

def test_roc_perfect_separation():
    results = [result_with("a", "invalid", 0.9), result_with("b", "invalid", 0.8),
               result_with("c", "correct", 0.2), result_with("d", "correct", 0.1)]
    curve = compute_roc(results, "change")
    assert curve.auc == 1.0
    assert curve.points[0] == (0.0, 0.0)
    assert curve.points[-1] == (1.0, 1.0)


def test_roc_all_identical_scores():
    results = [result_with("a", "invalid", 0.5), result_with("b", "correct", 0.5)]
    curve = compute_roc(results, "change")
    assert curve.auc == 0.5


def test_roc_spec_example():
    results = [result_with("a", "invalid", 0.9), result_with("b", "invalid", 0.8),
               result_with("c", "correct", 0.4), result_with("d", "correct", 0.1)]
    assert compute_roc(results, "change").auc == 1.0
    swapped = [result_with("a", "invalid", 0.9), result_with("b", "correct", 0.8),
               result_with("c", "invalid", 0.4), result_with("d", "correct", 0.1)]
    assert compute_roc(swapped, "change").auc == 0.75


def test_roc_single_class_errors():
    results = [result_with("a", "invalid", 0.9)]
    with pytest.raises(ValueError):
        compute_roc(results, "change")


def test_roc_monotone_endpoints(rng):
    results = [result_with(f"s{i}", "invalid" if rng.random() < 0.5 else "correct",
                           float(rng.random())) for i in range(20)]
    labels = {r.label for r in results}
    if len(labels) < 2:
        results.append(result_with("x", "correct", 0.5))
        results.append(result_with("y", "invalid", 0.4))
    curve = compute_roc(results, "change")
    fprs = [p[0] for p in curve.points]
    tprs = [p[1] for p in curve.points]
    assert fprs == sorted(fprs)
    assert tprs == sorted(tprs)
    assert curve.points[0] == (0.0, 0.0)
    assert curve.points[-1] == (1.0, 1.0)


def test_roc_matches_concordance_oracle_exactly(rng):
    for trial in range(100):
        n = int(rng.integers(2, 20))
        labels = []
        while len(set(labels)) < 2:
            labels = ["invalid" if rng.random() < 0.5 else "correct" for _ in range(n)]
        # coarse score grid provokes plenty of ties
        scores = [float(rng.integers(0, 5)) / 4.0 for _ in range(n)]
        results = [result_with(f"s{i}", lab, sc) for i, (lab, sc) in
                   enumerate(zip(labels, scores))]
        curve = compute_roc(results, "change")
        pos = [s for s, lab in zip(scores, labels) if lab == "invalid"]
        neg = [s for s, lab in zip(scores, labels) if lab == "correct"]
        assert curve.auc == auc_concordance(pos, neg), f"trial {trial}"


# --- run_sequence ---------------------------------------------------------------

def make_log(name, seed=5):
    sc = SCRIPTED[name]()
    log = run_scenario(sc.world, sc.script, sc.sensor, seed)
    log.name = name
    return log


def detectors(cfg, names=("change", "gridmap", "histogram")):
    return [make_detector(n, cfg) for n in names]


def test_run_sequence_requires_merge():
    cfg = Config()
    log = make_log("crossing_correct")
    log.records = [r for r in log.records if type(r).__name__ != "MergeTriggerRecord"]
    with pytest.raises(ValueError, match="no forced merge"):
        run_sequence(log, detectors(cfg), cfg)


def test_run_sequence_correct_vs_invalid_scores():
    cfg = Config()
    correct = run_sequence(make_log("crossing_correct"), detectors(cfg), cfg)
    invalid = run_sequence(make_log("crossing_rot90"), detectors(cfg), cfg)
    assert correct.label == "correct"
    assert invalid.label == "invalid"
    assert correct.max_score["change"] < 0.1
    assert invalid.max_score["change"] > 0.5
    assert invalid.max_score["gridmap"] > 0.3
    assert invalid.first_alarm["change"] is not None
    assert correct.first_alarm["change"] is None


def test_run_sequence_detector_subset():
    cfg = Config()
    result = run_sequence(make_log("symmetric_room_correct"), detectors(cfg, ("histogram",)), cfg)
    assert set(result.max_score) == {"histogram"}


def test_run_sequence_deterministic():
    cfg = Config()
    a = run_sequence(make_log("twin_corridor_invalid"), detectors(cfg), cfg)
    b = run_sequence(make_log("twin_corridor_invalid"), detectors(cfg), cfg)
    assert a.max_score == b.max_score
    assert a.first_alarm == b.first_alarm
    assert a.n_updates == b.n_updates


def test_reports_round_trip(tmp_path):
    results = [result_with("a", "invalid", 0.9), result_with("b", "correct", 0.2)]
    for r in results:
        r.max_score["gridmap"] = r.max_score["change"] * 0.5
        r.mean_ms["gridmap"] = 2.0
        r.first_alarm["change"] = 3 if r.label == "invalid" else None
    curves = [compute_roc(results, "change"), compute_roc(results, "gridmap")]
    emit_reports(results, curves, tmp_path)
    assert (tmp_path / "results.csv").exists()
    assert (tmp_path / "roc.csv").exists()
    assert (tmp_path / "summary.csv").exists()
    svg = (tmp_path / "roc.svg").read_text()
    assert svg.count("<path") == 2  # one path per detector
    assert "true positive rate" in svg
    loaded = read_results_csv(tmp_path / "results.csv")
    assert {r.sequence_id for r in loaded} == {"a", "b"}
    got = {r.sequence_id: r for r in loaded}
    assert got["a"].max_score["change"] == 0.9
    assert got["a"].first_alarm["change"] == 3
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == "detector,auc,mean_ms_per_vertex"


# --- live mode -------------------------------------------------------------------

def test_live_mode_invalid_unmerges_correct_survives():
    cfg = Config()
    inv_events = live_mode(make_log("twin_corridor_invalid"),
                           detectors(cfg, ("change",)), cfg)
    kinds = [e.kind for e in inv_events]
    assert "merge_applied" in kinds
    assert "alarm" in kinds
    assert "unmerge_done" in kinds
    assert kinds.index("alarm") < kinds.index("unmerge_done")

    cor_events = live_mode(make_log("twin_corridor_correct"),
                           detectors(cfg, ("change",)), cfg)
    cor_kinds = [e.kind for e in cor_events]
    assert "merge_applied" in cor_kinds
    assert "unmerge_done" not in cor_kinds


def test_live_mode_post_unmerge_state():
    from mergeguard.harness import _drive

    cfg = Config()
    log = make_log("twin_corridor_invalid")
    result, events, store = _drive(log, detectors(cfg, ("change",)), cfg, live=True)
    assert any(e.kind == "unmerge_done" for e in events)
    assert len(store.active.epochs) == 1
    assert store.backups == {}
    assert len(store.inactive) == 1
    store.check_invariants()
