import math

import numpy as np
import pytest

from mergeguard.geometry import Pose2
from mergeguard.graph_io import parse_store, serialize_graph, serialize_store
from mergeguard.model import Edge, GraphStore, Scan, Vertex

from conftest import DEFAULT_INFO, random_scan


def test_scan_validation():
    with pytest.raises(ValueError):
        Scan(Pose2.identity(), [0.2, 0.1], [1.0, 1.0], 10.0)  # not increasing
    with pytest.raises(ValueError):
        Scan(Pose2.identity(), [0.1, 0.2], [1.0, 11.0], 10.0)  # beyond range_max
    with pytest.raises(ValueError):
        Scan(Pose2.identity(), [0.1, 0.2], [0.0, 1.0], 10.0)  # zero range


def test_scan_from_polar_drops_invalid():
    scan = Scan.from_polar(Pose2.identity(), [0.0, 0.1, 0.2, 0.3], [1.0, None, -2.0, 12.0], 10.0)
    assert len(scan) == 1
    assert scan.ranges[0] == 1.0


def test_scan_arrays_frozen():
    scan = Scan(Pose2.identity(), [0.0, 0.1], [1.0, 2.0], 10.0)
    with pytest.raises(ValueError):
        scan.ranges[0] = 5.0


def test_vertex_pose_mirrors_scan():
    scan = Scan(Pose2.identity(), [0.0], [1.0], 10.0)
    v = Vertex(1, 1, scan)
    v.pose = Pose2(3, 4, 0.5)
    assert scan.pose == Pose2(3, 4, 0.5)


def test_edge_validation():
    with pytest.raises(ValueError):
        Edge(1, 1, "odometry", Pose2.identity(), DEFAULT_INFO)
    with pytest.raises(ValueError):
        Edge(1, 2, "bogus", Pose2.identity(), DEFAULT_INFO)
    with pytest.raises(ValueError):
        Edge(1, 2, "odometry", Pose2.identity(), -DEFAULT_INFO)
    asym = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(ValueError):
        Edge(1, 2, "odometry", Pose2.identity(), asym)


def test_begin_epoch_first():
    store = GraphStore()
    eid = store.begin_epoch()
    assert eid == 1
    assert store.active.epochs == {1}
    assert store.inactive == []


def test_begin_epoch_archives_nonempty(rng):
    store = GraphStore()
    store.begin_epoch()
    store.add_vertex(random_scan(rng), Pose2.identity(), DEFAULT_INFO)
    eid = store.begin_epoch()
    assert eid == 2
    assert store.active.epochs == {2}
    assert [g.epochs for g in store.inactive] == [{1}]
    store.check_invariants()


def test_begin_epoch_discards_empty():
    store = GraphStore()
    store.begin_epoch()
    eid = store.begin_epoch()  # nothing was added to epoch 1
    assert eid == 2
    assert store.inactive == []
    assert store.active.epochs == {2}


def test_epoch_ids_strictly_increase(rng):
    store = GraphStore()
    seen = []
    for _ in range(5):
        seen.append(store.begin_epoch())
        store.add_vertex(random_scan(rng), Pose2.identity(), DEFAULT_INFO)
    assert seen == sorted(seen)
    assert len(set(seen)) == len(seen)


def test_add_vertex_first_has_no_edge(rng):
    store = GraphStore()
    store.begin_epoch()
    store.add_vertex(random_scan(rng), Pose2(1, 2, 0.3), DEFAULT_INFO)
    assert len(store.active.edges) == 0
    v = next(iter(store.active.vertices.values()))
    assert v.pose == Pose2(1, 2, 0.3)  # identity composed with odom


def test_add_vertex_chains_odometry(rng):
    store = GraphStore()
    store.begin_epoch()
    store.add_vertex(random_scan(rng), Pose2(0, 0, 0), DEFAULT_INFO)
    v2 = store.add_vertex(random_scan(rng), Pose2(1, 0, 0), DEFAULT_INFO)
    assert store.active.vertices[v2].pose == Pose2(1, 0, 0)
    assert len(store.active.edges) == 1
    assert store.active.edges[0].kind == "odometry"


def test_add_vertex_se2_composition(rng):
    store = GraphStore()
    store.begin_epoch()
    store.add_vertex(random_scan(rng), Pose2(0, 0, 0), DEFAULT_INFO)
    store.add_vertex(random_scan(rng), Pose2(0, 0, math.pi / 2), DEFAULT_INFO)
    v3 = store.add_vertex(random_scan(rng), Pose2(1, 0, 0), DEFAULT_INFO)
    p = store.active.vertices[v3].pose
    assert p.x == pytest.approx(0.0, abs=1e-12)
    assert p.y == pytest.approx(1.0)
    assert p.theta == pytest.approx(math.pi / 2)


def test_vertex_ids_globally_unique(rng):
    store = GraphStore()
    ids = []
    for _ in range(3):
        store.begin_epoch()
        for _ in range(4):
            ids.append(store.add_vertex(random_scan(rng), Pose2(0.1, 0, 0), DEFAULT_INFO))
    assert len(set(ids)) == len(ids)
    store.check_invariants()


def test_store_serialization_round_trip(rng):
    store = GraphStore()
    for _ in range(2):
        store.begin_epoch()
        for _ in range(3):
            store.add_vertex(random_scan(rng), Pose2(0.25, 0.01, 0.02), DEFAULT_INFO)
    text = serialize_store(store)
    restored = parse_store(text)
    assert serialize_store(restored) == text
    assert restored.current_epoch == store.current_epoch
    assert restored._next_vertex_id == store._next_vertex_id
    assert serialize_graph(restored.active) == serialize_graph(store.active)
    assert len(restored.inactive) == len(store.inactive)
    for a, b in zip(restored.inactive, store.inactive):
        assert serialize_graph(a) == serialize_graph(b)


def test_snapshot_is_immutable_view(rng):
    store = GraphStore()
    store.begin_epoch()
    vid = store.add_vertex(random_scan(rng), Pose2(1, 0, 0), DEFAULT_INFO)
    snap = store.snapshot()
    store.active.vertices[vid].pose = Pose2(9, 9, 0)
    assert snap.vertices[vid].pose == Pose2(1, 0, 0)
