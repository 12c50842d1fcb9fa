import math

import numpy as np
import pytest

from mergeguard.geometry import Pose2, wrap_angle
from mergeguard.graph_io import serialize_graph
from mergeguard.merging import MergeDirector, MergeError, MergeSpec, merge, unmerge
from mergeguard.model import Edge, GraphStore

from conftest import DEFAULT_INFO, random_scan

INFO = DEFAULT_INFO


def two_epoch_store(rng, n1=2, n2=3):
    """Epoch 1 archived with n1 vertices, active epoch 2 with n2 vertices."""
    store = GraphStore()
    store.begin_epoch()
    e1 = [store.add_vertex(random_scan(rng), Pose2(0.5, 0, 0.05), INFO) for _ in range(n1)]
    store.begin_epoch()
    e2 = [store.add_vertex(random_scan(rng), Pose2(0.4, 0.02, -0.03), INFO) for _ in range(n2)]
    return store, e1, e2


def loop_edge(from_vid, to_vid, pose=Pose2(0.3, 0.1, 0.02)):
    return Edge(from_vid, to_vid, "merge_loop_closure", pose, INFO)


def test_merge_unions_counts(rng):
    store, e1, e2 = two_epoch_store(rng, n1=2, n2=3)
    assert len(store.active.vertices) == 3
    assert len(store.active.edges) == 2
    assert len(store.inactive[0].vertices) == 2
    merge(store, 0, [loop_edge(e2[-1], e1[0])])
    assert len(store.active.vertices) == 5
    assert len(store.active.edges) == 2 + 1 + 1  # both chains plus the loop edge
    assert store.active.epochs == {1, 2}
    assert store.inactive == []
    store.check_invariants()


def test_merge_epoch_union(rng):
    store, e1, e2 = two_epoch_store(rng)
    merge(store, 0, [loop_edge(e2[0], e1[0])])
    store.begin_epoch()
    e3 = [store.add_vertex(random_scan(rng), Pose2(0.2, 0, 0), INFO) for _ in range(2)]
    assert [g.epochs for g in store.inactive] == [{1, 2}]
    merge(store, 0, [loop_edge(e3[0], e1[1])])
    assert store.active.epochs == {1, 2, 3}


def test_merge_preserves_total_vertex_count(rng):
    store, e1, e2 = two_epoch_store(rng, 4, 4)
    total = len(store.active.vertices) + sum(len(g.vertices) for g in store.inactive)
    merge(store, 0, [loop_edge(e2[1], e1[2])])
    assert len(store.active.vertices) + sum(len(g.vertices) for g in store.inactive) == total


def test_merge_errors(rng):
    store, e1, e2 = two_epoch_store(rng)
    with pytest.raises(MergeError, match="loop closure edge"):
        merge(store, 0, [])
    with pytest.raises(MergeError, match="unknown vertex"):
        merge(store, 0, [loop_edge(e2[0], 999)])
    with pytest.raises(MergeError, match="must connect"):
        merge(store, 0, [loop_edge(e2[0], e2[1])])
    with pytest.raises(MergeError, match="must connect"):
        merge(store, 0, [loop_edge(e1[0], e1[1])])


def test_merge_fixed_vertex_bit_identical(rng):
    store, e1, e2 = two_epoch_store(rng)
    anchor_before = store.active.vertices[e2[0]].pose
    merge(store, 0, [loop_edge(e2[-1], e1[0])])
    anchor_after = store.active.vertices[e2[0]].pose
    assert anchor_before.x == anchor_after.x
    assert anchor_before.y == anchor_after.y
    assert anchor_before.theta == anchor_after.theta


def test_merge_rigid_prealignment_consistency(rng):
    """With a single loop edge the merged graphs keep zero residual."""
    store, e1, e2 = two_epoch_store(rng)
    rel = Pose2(1.0, -0.5, 0.3)
    result = merge(store, 0, [loop_edge(e2[-1], e1[0], rel)])
    assert result.final_chi2 < 1e-10
    got = store.active.vertices[e2[-1]].pose.relative_to(store.active.vertices[e1[0]].pose)
    assert got.x == pytest.approx(rel.x, abs=1e-9)
    assert got.y == pytest.approx(rel.y, abs=1e-9)
    assert abs(wrap_angle(got.theta - rel.theta)) < 1e-9


def test_merge_reversed_edge_direction(rng):
    store, e1, e2 = two_epoch_store(rng)
    rel = Pose2(0.7, 0.2, -0.4)
    merge(store, 0, [loop_edge(e1[0], e2[-1], rel)])  # inactive -> active direction
    got = store.active.vertices[e1[0]].pose.relative_to(store.active.vertices[e2[-1]].pose)
    assert got.x == pytest.approx(rel.x, abs=1e-9)


def test_unmerge_restores_backup_byte_identical(rng):
    store, e1, e2 = two_epoch_store(rng)
    before = serialize_graph(store.inactive[0])
    merge(store, 0, [loop_edge(e2[-1], e1[0])])
    assert frozenset({1}) in store.backups
    unmerge(store)
    assert store.backups == {}
    assert len(store.inactive) == 1
    assert serialize_graph(store.inactive[0]) == before
    assert store.active.epochs == {2}
    store.check_invariants()


def test_unmerge_removes_dangling_edges(rng):
    store, e1, e2 = two_epoch_store(rng)
    merge(store, 0, [loop_edge(e2[0], e1[0])])
    unmerge(store)
    for e in store.active.edges:
        assert e.from_id in store.active.vertices
        assert e.to_id in store.active.vertices
    assert all(v.epoch == 2 for v in store.active.vertices.values())


def test_unmerge_requires_merged_graph(rng):
    store, _e1, _e2 = two_epoch_store(rng)
    with pytest.raises(MergeError, match="single epoch"):
        unmerge(store)


def test_unmerge_restores_poses_without_intervening_data(rng):
    store, e1, e2 = two_epoch_store(rng, 3, 4)
    before = {vid: store.active.vertices[vid].pose for vid in e2}
    merge(store, 0, [loop_edge(e2[2], e1[1])])
    unmerge(store)
    for vid in e2:
        after = store.active.vertices[vid].pose
        assert after.x == pytest.approx(before[vid].x, abs=1e-6)
        assert after.y == pytest.approx(before[vid].y, abs=1e-6)
        assert abs(wrap_angle(after.theta - before[vid].theta)) < 1e-6


def test_double_merge_then_unmerge_restores_all(rng):
    store = GraphStore()
    store.begin_epoch()
    a = [store.add_vertex(random_scan(rng), Pose2(0.5, 0, 0), INFO) for _ in range(2)]
    store.begin_epoch()
    b = [store.add_vertex(random_scan(rng), Pose2(0.5, 0, 0), INFO) for _ in range(2)]
    store.begin_epoch()
    c = [store.add_vertex(random_scan(rng), Pose2(0.5, 0, 0), INFO) for _ in range(3)]
    backups = [serialize_graph(g) for g in store.inactive]
    merge(store, 0, [loop_edge(c[0], a[0])])
    merge(store, 0, [loop_edge(c[1], b[0])])
    assert store.active.epochs == {1, 2, 3}
    unmerge(store)
    assert store.active.epochs == {3}
    assert [serialize_graph(g) for g in store.inactive] == backups
    store.check_invariants()


def test_merge_count_preserved_through_unmerge(rng):
    store, e1, e2 = two_epoch_store(rng, 3, 3)
    total = len(store.active.vertices) + sum(len(g.vertices) for g in store.inactive)
    merge(store, 0, [loop_edge(e2[0], e1[0])])
    unmerge(store)
    assert len(store.active.vertices) + sum(len(g.vertices) for g in store.inactive) == total


def test_director_candidates(rng):
    store, e1, e2 = two_epoch_store(rng)
    spec = MergeSpec(4, 1, 0, Pose2(1, 0, 0), INFO, "invalid")
    director = MergeDirector([spec])
    for ordinal, vid in enumerate(e1 + e2):
        director.note_vertex(ordinal, vid, 1 if vid in e1 else 2)
    assert director.candidates(store, 3) == []
    cands = director.candidates(store, 4)
    assert len(cands) == 1
    idx, edges, got_spec = cands[0]
    assert idx == 0
    assert edges[0].from_id == e2[-1]
    assert edges[0].to_id == e1[0]
    assert got_spec.label == "invalid"


def test_director_unknown_epoch(rng):
    store, e1, e2 = two_epoch_store(rng)
    director = MergeDirector([MergeSpec(0, 7, 0, Pose2(1, 0, 0), INFO, "correct")])
    director.note_vertex(0, e2[0], 2)
    with pytest.raises(MergeError, match="no inactive graph"):
        director.candidates(store, 0)


def test_backup_spill_to_disk(tmp_path, rng):
    store, e1, e2 = two_epoch_store(rng)
    store.backup_spill_dir = str(tmp_path)
    store.backup_spill_bytes = 10  # force the spill
    before = serialize_graph(store.inactive[0])
    merge(store, 0, [loop_edge(e2[0], e1[0])])
    ref = store.backups[frozenset({1})]
    assert ref.startswith("@file:")
    assert list(tmp_path.glob("backup_*.graph"))
    unmerge(store)
    assert serialize_graph(store.inactive[0]) == before
