"""Relation graph extraction.

A scene's units become graph nodes (rows of identical, touching
infrastructure units collapse into a single node) and directed, typed
edges record where every other node lies relative to a node's own
frame: 4 directions x 4 distance bins = 16 edge types, plus alignment
bits for coinciding box coordinates.

Visibility is decided by axis-aligned raycasts from the four sides of a
node's bounding box: parallel rays, one per grid unit, offset half a
unit from the side's ends, each travelling along the side's outward
normal until the nearest box in its path.  A node sees another when
more than 15% of one side's rays hit it first.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .catalog import UnitKind
from .scene import (
    OBB,
    DistanceBin,
    Scene,
    Unit,
    classify_distance,
    obb_distance,
    rotate_to_frame,
)

EDGE_TYPE_COUNT = 16
VISIBILITY_THRESHOLD = 0.15  # strict: a fraction of exactly 0.15 is no edge
ALIGN_EPS = 0.5
RAY_SPACING = 1.0
RAY_OFFSET = 0.5

GRAPH_FORMAT = "siterec.graph/1"


class Direction(IntEnum):
    """Relative direction in a node's own frame; FRONT is its heading."""

    FRONT = 0
    BACK = 1
    RIGHT = 2
    LEFT = 3


# World sides of an axis-aligned box, keyed by outward normal.
_WORLD_SIDES = (
    ("east", (1, 0)),
    ("west", (-1, 0)),
    ("north", (0, 1)),
    ("south", (0, -1)),
)

# Outward normal expressed in the node's local frame -> direction label.
_LOCAL_TO_DIRECTION = {
    (1, 0): Direction.FRONT,
    (-1, 0): Direction.BACK,
    (0, -1): Direction.RIGHT,
    (0, 1): Direction.LEFT,
}


def side_direction(side: str, orientation: int) -> Direction:
    normal = dict(_WORLD_SIDES)[side]
    return _LOCAL_TO_DIRECTION[rotate_to_frame(normal, orientation)]


def edge_type_index(direction: Direction, distance_bin: DistanceBin) -> int:
    """Edge-type label in [1, 16]; 0 is reserved for 'no edge'."""
    return 1 + int(direction) * 4 + int(distance_bin)


def decode_edge_type(label: int) -> tuple[Direction, DistanceBin]:
    if not 1 <= label <= EDGE_TYPE_COUNT:
        raise ValueError(f"edge-type label out of range: {label}")
    return Direction((label - 1) // 4), DistanceBin((label - 1) % 4)


@dataclass(frozen=True)
class RelationNode:
    node_id: int
    member_unit_ids: tuple[int, ...]
    merged_obb: OBB
    category_id: int
    orientation: int

    def label_one_hot(self, n_categories: int) -> np.ndarray:
        v = np.zeros(n_categories, dtype=np.float32)
        v[self.category_id] = 1.0
        return v

    @property
    def o_vec(self) -> np.ndarray:
        return np.asarray(self.merged_obb.as_vector(), dtype=np.float32)


@dataclass(frozen=True)
class RelationEdge:
    src_node_id: int
    dst_node_id: int
    direction: Direction
    distance_bin: DistanceBin
    distance: float
    alignment: tuple[int, int, int, int, int, int]

    @property
    def type_index(self) -> int:
        return edge_type_index(self.direction, self.distance_bin)

    def t_one_hot(self) -> np.ndarray:
        v = np.zeros(EDGE_TYPE_COUNT, dtype=np.float32)
        v[self.type_index - 1] = 1.0
        return v

    @property
    def m_vec(self) -> np.ndarray:
        return np.asarray(self.alignment, dtype=np.float32)


@dataclass
class RelationGraph:
    nodes: list[RelationNode]
    edges: list[RelationEdge]
    A: np.ndarray  # (V, V) int, entries in [0, 16]
    one_hot: np.ndarray  # (V, 17, V) uint8

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


# ---------------------------------------------------------------------------
# Raycasting


def _boxes_array(obbs: list[OBB]) -> np.ndarray:
    if not obbs:
        return np.zeros((0, 4), dtype=np.float64)
    return np.asarray([o.as_vector() for o in obbs], dtype=np.float64)


def _side_rays(obb: OBB, side: str) -> tuple[float, np.ndarray, int, int]:
    """(plane, positions, travel_axis, sign) for one side's outward rays."""
    if side in ("east", "west"):
        span0, span1 = obb.y, obb.y2
        plane = obb.x2 if side == "east" else obb.x
        axis, sign = 0, (1 if side == "east" else -1)
    else:
        span0, span1 = obb.x, obb.x2
        plane = obb.y2 if side == "north" else obb.y
        axis, sign = 1, (1 if side == "north" else -1)
    n = int(np.floor((span1 - span0 - RAY_OFFSET) / RAY_SPACING)) + 1
    positions = span0 + RAY_OFFSET + RAY_SPACING * np.arange(max(n, 0), dtype=np.float64)
    return float(plane), positions, axis, sign


def _first_hit_owners(
    plane: float,
    positions: np.ndarray,
    travel_axis: int,
    sign: int,
    boxes: np.ndarray,
    owners: np.ndarray,
    skip_owner: int,
) -> np.ndarray:
    """Owner of each ray's nearest hit, or -1 for a miss.

    Rays start on ``plane`` at the given perpendicular ``positions`` and
    travel along ``travel_axis`` with the given sign.  Hits at distance
    zero (touching boxes) count; ties resolve to the lowest owner id.
    """
    out = np.full(positions.shape[0], -1, dtype=np.int64)
    if boxes.shape[0] == 0 or positions.shape[0] == 0:
        return out
    lo_t = boxes[:, travel_axis]
    hi_t = lo_t + boxes[:, 2 + travel_axis]
    perp = 1 - travel_axis
    lo_p = boxes[:, perp]
    hi_p = lo_p + boxes[:, 2 + perp]

    front = lo_t if sign > 0 else hi_t
    t = (front - plane) * sign
    eligible = (t >= 0.0) & (owners != skip_owner)
    if not eligible.any():
        return out
    hit = eligible[:, None] & (positions[None, :] > lo_p[:, None]) & (positions[None, :] < hi_p[:, None])
    order = np.lexsort((owners, t))
    hit = hit[order]
    any_hit = hit.any(axis=0)
    first = hit.argmax(axis=0)
    out[any_hit] = owners[order][first[any_hit]]
    return out


def _side_fractions(
    obb: OBB, orientation: int, boxes: np.ndarray, owners: np.ndarray, skip_owner: int
) -> dict[Direction, dict[int, float]]:
    """Per-direction map of {owner -> fraction of that side's rays hit first}."""
    result: dict[Direction, dict[int, float]] = {}
    for side, _normal in _WORLD_SIDES:
        plane, positions, axis, sign = _side_rays(obb, side)
        hits = _first_hit_owners(plane, positions, axis, sign, boxes, owners, skip_owner)
        fractions: dict[int, float] = {}
        n_rays = positions.shape[0]
        if n_rays:
            ids, counts = np.unique(hits[hits >= 0], return_counts=True)
            for owner, count in zip(ids.tolist(), counts.tolist()):
                fractions[owner] = count / n_rays
        result[side_direction(side, orientation)] = fractions
    return result


def raycast_visibility(scene: Scene, unit: Unit) -> dict[Direction, dict[int, float]]:
    """Visible fraction of every other unit from each side of ``unit``."""
    others = [u for u in scene.units if u.unit_id != unit.unit_id]
    boxes = _boxes_array([u.obb for u in others])
    owners = np.asarray([u.unit_id for u in others], dtype=np.int64)
    return _side_fractions(unit.obb, unit.orientation, boxes, owners, unit.unit_id)


# ---------------------------------------------------------------------------
# Node merging


def _max_mutual_fraction(
    i: int, j: int, obbs: list[OBB], orientations: list[int]
) -> tuple[float, float]:
    boxes = _boxes_array(obbs)
    owners = np.arange(len(obbs), dtype=np.int64)
    f_ij = max(
        (frac.get(j, 0.0) for frac in _side_fractions(obbs[i], orientations[i], boxes, owners, i).values()),
        default=0.0,
    )
    f_ji = max(
        (frac.get(i, 0.0) for frac in _side_fractions(obbs[j], orientations[j], boxes, owners, j).values()),
        default=0.0,
    )
    return f_ij, f_ji


def _runs_aligned(a: OBB, b: OBB) -> bool:
    # Same h and equal y (a horizontal run), or same w and equal x (vertical).
    return (a.h == b.h and a.y == b.y) or (a.w == b.w and a.x == b.x)


def merge_nodes(scene: Scene) -> list[RelationNode]:
    """Collapse touching runs of identical infrastructure units into nodes.

    A pair merges when it shares category and orientation, forms an
    axis-aligned run of equal cross-section, touches (distance 0), and
    each member is fully visible from the other.  Merging repeats until
    no pair qualifies, always taking the lowest-unit-id pair first, so
    the result is deterministic.  Non-infrastructure units map 1:1.
    """
    members: list[list[int]] = []
    obbs: list[OBB] = []
    cats: list[int] = []
    orients: list[int] = []
    for u in sorted(scene.units, key=lambda u: u.unit_id):
        members.append([u.unit_id])
        obbs.append(u.obb)
        cats.append(u.category_id)
        orients.append(u.orientation)

    def mergeable(i: int, j: int) -> bool:
        if cats[i] != cats[j] or orients[i] != orients[j]:
            return False
        if scene.catalog[cats[i]].kind is not UnitKind.INFRASTRUCTURE:
            return False
        if not _runs_aligned(obbs[i], obbs[j]):
            return False
        if obb_distance(obbs[i], obbs[j]) != 0.0:
            return False
        f_ij, f_ji = _max_mutual_fraction(i, j, obbs, orients)
        return f_ij == 1.0 and f_ji == 1.0

    merged = True
    while merged:
        merged = False
        order = sorted(range(len(members)), key=lambda k: members[k][0])
        for a_pos in range(len(order)):
            for b_pos in range(a_pos + 1, len(order)):
                i, j = order[a_pos], order[b_pos]
                if not mergeable(i, j):
                    continue
                a, b = obbs[i], obbs[j]
                union = OBB(
                    min(a.x, b.x),
                    min(a.y, b.y),
                    max(a.x2, b.x2) - min(a.x, b.x),
                    max(a.y2, b.y2) - min(a.y, b.y),
                )
                members[i] = sorted(members[i] + members[j])
                obbs[i] = union
                del members[j], obbs[j], cats[j], orients[j]
                merged = True
                break
            if merged:
                break

    order = sorted(
        range(len(members)), key=lambda k: (obbs[k].y, obbs[k].x, members[k][0])
    )
    return [
        RelationNode(
            node_id=rank,
            member_unit_ids=tuple(members[k]),
            merged_obb=obbs[k],
            category_id=cats[k],
            orientation=orients[k],
        )
        for rank, k in enumerate(order)
    ]


# ---------------------------------------------------------------------------
# Edges


def alignment_attributes(a: OBB, b: OBB) -> tuple[int, int, int, int, int, int]:
    """Bits for coinciding coordinates, in the order
    (left, vertical center, right, top, horizontal center, bottom)."""

    def near(p: float, q: float) -> int:
        return int(abs(p - q) <= ALIGN_EPS)

    return (
        near(a.x, b.x),
        near(a.x + a.w / 2.0, b.x + b.w / 2.0),
        near(a.x2, b.x2),
        near(a.y2, b.y2),
        near(a.y + a.h / 2.0, b.y + b.h / 2.0),
        near(a.y, b.y),
    )


def _geometric_direction(src: RelationNode, dst: RelationNode) -> Direction:
    """Direction of ``dst`` in ``src``'s frame from the center displacement."""
    sc = src.merged_obb.center
    dc = dst.merged_obb.center
    dx, dy = rotate_to_frame((dc[0] - sc[0], dc[1] - sc[1]), src.orientation)
    if abs(dx) >= abs(dy):
        return Direction.FRONT if dx > 0 else Direction.BACK
    return Direction.LEFT if dy > 0 else Direction.RIGHT


def extract_edges(scene: Scene, nodes: list[RelationNode]) -> list[RelationEdge]:
    """Directed edges between nodes, with reciprocal edges guaranteed.

    An edge src -> dst exists when more than 15% of the rays on one of
    src's sides hit dst first; its direction is that side's (ties favor
    the lower direction label).  Every detected edge gets a reverse
    edge at the same distance, directed by dst's geometry when the
    raycast alone would not have produced one.
    """
    scale = scene.distance_scale()
    boxes = _boxes_array([n.merged_obb for n in nodes])
    owners = np.asarray([n.node_id for n in nodes], dtype=np.int64)
    by_id = {n.node_id: n for n in nodes}

    best: dict[tuple[int, int], tuple[float, Direction]] = {}
    for node in nodes:
        fractions = _side_fractions(node.merged_obb, node.orientation, boxes, owners, node.node_id)
        for direction in Direction:
            for target, frac in fractions[direction].items():
                key = (node.node_id, target)
                if key not in best or frac > best[key][0]:
                    best[key] = (frac, direction)

    def make_edge(src: int, dst: int, direction: Direction) -> RelationEdge:
        a, b = by_id[src].merged_obb, by_id[dst].merged_obb
        d = obb_distance(a, b)
        return RelationEdge(
            src_node_id=src,
            dst_node_id=dst,
            direction=direction,
            distance_bin=classify_distance(d, scale),
            distance=d,
            alignment=alignment_attributes(a, b),
        )

    edges: dict[tuple[int, int], RelationEdge] = {}
    for (src, dst), (frac, direction) in sorted(best.items()):
        if frac > VISIBILITY_THRESHOLD:
            edges[(src, dst)] = make_edge(src, dst, direction)
    for (src, dst) in sorted(edges):
        if (dst, src) not in edges:
            direction = _geometric_direction(by_id[dst], by_id[src])
            edges[(dst, src)] = make_edge(dst, src, direction)
    return [edges[key] for key in sorted(edges)]


def build_graph(scene: Scene) -> RelationGraph:
    """Full extraction: merged nodes, typed edges, and adjacency encodings."""
    nodes = merge_nodes(scene)
    edges = extract_edges(scene, nodes)
    n = len(nodes)
    A = np.zeros((n, n), dtype=np.int64)
    for e in edges:
        A[e.src_node_id, e.dst_node_id] = e.type_index
    one_hot = np.zeros((n, EDGE_TYPE_COUNT + 1, n), dtype=np.uint8)
    if n:
        rows = np.repeat(np.arange(n), n)
        cols = np.tile(np.arange(n), n)
        one_hot[rows, A[rows, cols], cols] = 1
    return RelationGraph(nodes=nodes, edges=edges, A=A, one_hot=one_hot)


# ---------------------------------------------------------------------------
# Graph documents


def graph_to_doc(graph: RelationGraph) -> dict:
    return {
        "format": GRAPH_FORMAT,
        "nodes": [
            {
                "id": n.node_id,
                "members": list(n.member_unit_ids),
                "category": n.category_id,
                "orientation": n.orientation,
                "obb": [n.merged_obb.x, n.merged_obb.y, n.merged_obb.w, n.merged_obb.h],
            }
            for n in graph.nodes
        ],
        "edges": [
            {
                "src": e.src_node_id,
                "dst": e.dst_node_id,
                "direction": int(e.direction),
                "bin": int(e.distance_bin),
                "d": e.distance,
                "align": list(e.alignment),
            }
            for e in graph.edges
        ],
        "A": [
            [int(i), int(j), int(graph.A[i, j])]
            for i, j in zip(*np.nonzero(graph.A))
        ],
    }


def graph_from_doc(doc: dict) -> RelationGraph:
    if doc.get("format") != GRAPH_FORMAT:
        raise ValueError(f"unsupported graph format {doc.get('format')!r}")
    nodes = [
        RelationNode(
            node_id=int(d["id"]),
            member_unit_ids=tuple(int(m) for m in d["members"]),
            merged_obb=OBB(*d["obb"]),
            category_id=int(d["category"]),
            orientation=int(d["orientation"]),
        )
        for d in doc["nodes"]
    ]
    edges = [
        RelationEdge(
            src_node_id=int(d["src"]),
            dst_node_id=int(d["dst"]),
            direction=Direction(int(d["direction"])),
            distance_bin=DistanceBin(int(d["bin"])),
            distance=float(d["d"]),
            alignment=tuple(int(b) for b in d["align"]),
        )
        for d in doc["edges"]
    ]
    n = len(nodes)
    A = np.zeros((n, n), dtype=np.int64)
    for i, j, label in doc["A"]:
        A[int(i), int(j)] = int(label)
    one_hot = np.zeros((n, EDGE_TYPE_COUNT + 1, n), dtype=np.uint8)
    if n:
        rows = np.repeat(np.arange(n), n)
        cols = np.tile(np.arange(n), n)
        one_hot[rows, A[rows, cols], cols] = 1
    return RelationGraph(nodes=nodes, edges=edges, A=A, one_hot=one_hot)


def write_graph(graph: RelationGraph, path: str | Path) -> None:
    from .sceneio import dumps_canonical

    Path(path).write_text(dumps_canonical(graph_to_doc(graph)), encoding="utf-8")


def read_graph(path: str | Path) -> RelationGraph:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return graph_from_doc(doc)
