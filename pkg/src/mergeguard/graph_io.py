"""Canonical newline-delimited text serialization for graphs and stores.

Format (one record per line, fields space-separated, floats via repr for exact
round-tripping):

    G <epoch> ...                                  sorted epoch ids
    V <id> <epoch> <x> <y> <theta>                 vertices sorted by id
    S <range_max> <n> <b1> <r1> ... <bn> <rn>      range block of the preceding V
    E <from> <to> <kind> <dx> <dy> <dtheta> <i11> <i12> <i13> <i21> ... <i33>

Edges are written in a canonical sort order, so serialize(parse(text)) == text.
Used for in-memory merge backups, optional on-disk spill, and test fixtures.
"""

from __future__ import annotations

import numpy as np

from .geometry import Pose2
from .model import Edge, GraphStore, Scan, SlamGraph, Vertex


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_graph(graph: SlamGraph) -> str:
    lines = ["G " + " ".join(str(e) for e in sorted(graph.epochs))]
    for vid in sorted(graph.vertices):
        v = graph.vertices[vid]
        p = v.pose
        lines.append(f"V {v.id} {v.epoch} {_fmt(p.x)} {_fmt(p.y)} {_fmt(p.theta)}")
        scan = v.scan
        parts = [f"S {_fmt(scan.range_max)} {len(scan)}"]
        for b, r in zip(scan.bearings, scan.ranges):
            parts.append(f"{_fmt(b)} {_fmt(r)}")
        lines.append(" ".join(parts))

    def edge_key(e: Edge):
        p = e.relative_pose
        return (e.from_id, e.to_id, e.kind, p.x, p.y, p.theta)

    for e in sorted(graph.edges, key=edge_key):
        p = e.relative_pose
        info = " ".join(_fmt(x) for x in np.asarray(e.information).ravel())
        lines.append(
            f"E {e.from_id} {e.to_id} {e.kind} {_fmt(p.x)} {_fmt(p.y)} {_fmt(p.theta)} {info}"
        )
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> SlamGraph:
    graph: SlamGraph | None = None
    pending: tuple[int, int, Pose2] | None = None  # vertex awaiting its S line
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tag, *fields = line.split()
        if tag == "G":
            graph = SlamGraph(epochs={int(x) for x in fields})
        elif graph is None:
            raise ValueError(f"line {lineno}: record before G header")
        elif tag == "V":
            if pending is not None:
                raise ValueError(f"line {lineno}: V record without range block")
            vid, epoch = int(fields[0]), int(fields[1])
            pose = Pose2(float(fields[2]), float(fields[3]), float(fields[4]))
            pending = (vid, epoch, pose)
        elif tag == "S":
            if pending is None:
                raise ValueError(f"line {lineno}: S record without preceding V")
            range_max = float(fields[0])
            n = int(fields[1])
            flat = [float(x) for x in fields[2:]]
            if len(flat) != 2 * n:
                raise ValueError(f"line {lineno}: expected {2 * n} values, got {len(flat)}")
            scan = Scan(pending[2], flat[0::2], flat[1::2], range_max)
            graph.add_vertex(Vertex(pending[0], pending[1], scan))
            pending = None
        elif tag == "E":
            info = np.array([float(x) for x in fields[6:15]]).reshape(3, 3)
            graph.add_edge(
                Edge(
                    int(fields[0]),
                    int(fields[1]),
                    fields[2],
                    Pose2(float(fields[3]), float(fields[4]), float(fields[5])),
                    info,
                )
            )
        else:
            raise ValueError(f"line {lineno}: unknown record tag {tag!r}")
    if graph is None:
        raise ValueError("empty graph text")
    if pending is not None:
        raise ValueError("trailing V record without range block")
    return graph


def serialize_store(store: GraphStore) -> str:
    """Full store dump: counters, active graph, inactive graphs, backups."""
    out = [
        "STORE "
        f"{store.current_epoch if store.current_epoch is not None else -1} "
        f"{store._next_vertex_id} {store._next_epoch_id} "
        f"{store._prev_vertex_id if store._prev_vertex_id is not None else -1}"
    ]

    def block(text: str) -> list[str]:
        lines = text.splitlines()
        return [f"LINES {len(lines)}"] + lines

    if store.active is not None:
        out.append("ACTIVE")
        out += block(serialize_graph(store.active))
    out.append(f"INACTIVE {len(store.inactive)}")
    for g in store.inactive:
        out += block(serialize_graph(g))
    out.append(f"BACKUPS {len(store.backups)}")
    for key, text in store.backups.items():
        out.append("KEY " + " ".join(str(e) for e in sorted(key)))
        out += block(text)
    return "\n".join(out) + "\n"


def parse_store(text: str) -> GraphStore:
    lines = text.splitlines()
    pos = 0

    def take() -> str:
        nonlocal pos
        line = lines[pos]
        pos += 1
        return line

    header = take().split()
    if header[0] != "STORE":
        raise ValueError("missing STORE header")
    store = GraphStore()
    store.current_epoch = None if header[1] == "-1" else int(header[1])
    store._next_vertex_id = int(header[2])
    store._next_epoch_id = int(header[3])
    store._prev_vertex_id = None if header[4] == "-1" else int(header[4])

    def read_block() -> str:
        nonlocal pos
        tag, n = take().split()
        if tag != "LINES":
            raise ValueError("expected LINES header")
        n = int(n)
        blob = "\n".join(lines[pos : pos + n]) + "\n"
        pos += n
        return blob

    while pos < len(lines):
        line = take()
        if line == "ACTIVE":
            store.active = parse_graph(read_block())
        elif line.startswith("INACTIVE"):
            for _ in range(int(line.split()[1])):
                store.inactive.append(parse_graph(read_block()))
        elif line.startswith("BACKUPS"):
            for _ in range(int(line.split()[1])):
                key_line = take().split()
                if key_line[0] != "KEY":
                    raise ValueError("expected KEY line")
                key = frozenset(int(x) for x in key_line[1:])
                store.backups[key] = read_block()
        elif not line.strip():
            continue
        else:
            raise ValueError(f"unexpected store record {line!r}")
    return store
