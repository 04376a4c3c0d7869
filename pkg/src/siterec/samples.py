"""Training-sample assembly: hold out one architectural unit per sample and
predict its relation row (edges from every conditioning node to the held-out
slot) from the conditioning graph plus the rendered conditioning scene.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .catalog import UnitKind
from .graph import EDGE_TYPE_COUNT, RelationGraph, build_graph
from .model import EDGE_ATTR_DIM, EDGE_CLASSES, UNKNOWN_FLAG, PackedBatch
from .render import DESK_RESOLUTION, SiteImage, render_topdown
from .scene import Scene


@dataclass(frozen=True)
class TrainSample:
    source: str  # provenance label for reports
    target_unit_id: int
    target_category: int
    cond_scene: Scene
    cond_graph: RelationGraph
    target_row: np.ndarray  # (V,) int64 class per conditioning node (0 = no edge)
    target_dist: np.ndarray  # (V,) float64 exact distances where an edge exists
    image: SiteImage
    boxes_px: np.ndarray  # (V, 4) float32 pixel boxes of conditioning nodes
    conn_rows: np.ndarray  # (V, classes, V) uint8 one-hot connectivity
    node_attrs: np.ndarray  # (V, attr_dim) float32
    edge_index: np.ndarray  # (2, E) int64 local (receiver, sender)
    edge_attrs: np.ndarray  # (E, attr) float32

    @property
    def n_nodes(self) -> int:
        return len(self.cond_graph.nodes)


def _edge_features(graph: RelationGraph) -> tuple[np.ndarray, np.ndarray]:
    """Directed (receiver, sender) pairs with attributes: each edge i->j makes
    node i receive a message carrying i's view of j."""
    if not graph.edges:
        return np.zeros((2, 0), dtype=np.int64), np.zeros((0, EDGE_ATTR_DIM), dtype=np.float32)
    index = np.array([[e.src_node_id for e in graph.edges], [e.dst_node_id for e in graph.edges]], dtype=np.int64)
    attrs = np.zeros((len(graph.edges), EDGE_ATTR_DIM), dtype=np.float32)
    for row, e in enumerate(graph.edges):
        attrs[row, e.type_index - 1] = 1.0
        attrs[row, EDGE_TYPE_COUNT] = e.distance
        attrs[row, EDGE_TYPE_COUNT + 1 : EDGE_TYPE_COUNT + 7] = e.alignment
    return index, attrs


def _assemble(
    source: str,
    target_unit_id: int,
    target_category: int,
    cond_scene: Scene,
    cond: RelationGraph,
    target_row: np.ndarray,
    target_dist: np.ndarray,
    resolution: int,
) -> TrainSample:
    v = len(cond.nodes)
    n_categories = len(cond_scene.catalog)
    image = render_topdown(cond_scene, resolution)
    boxes = np.array([image.obb_pixel_box(n.merged_obb) for n in cond.nodes], dtype=np.float32)
    conn = np.zeros((v, EDGE_CLASSES, v), dtype=np.uint8)
    conn[:] = cond.one_hot
    attrs = np.array(
        [np.concatenate([n.label_one_hot(n_categories), n.o_vec]) for n in cond.nodes],
        dtype=np.float32,
    )
    edge_index, edge_attrs = _edge_features(cond)
    return TrainSample(
        source=source,
        target_unit_id=target_unit_id,
        target_category=target_category,
        cond_scene=cond_scene,
        cond_graph=cond,
        target_row=target_row,
        target_dist=target_dist,
        image=image,
        boxes_px=boxes,
        conn_rows=conn,
        node_attrs=attrs,
        edge_index=edge_index,
        edge_attrs=edge_attrs,
    )


def scene_sample(scene: Scene, resolution: int = DESK_RESOLUTION, source: str = "") -> TrainSample:
    """Conditioning sample for a scene as-is (nothing held out): the whole
    scene conditions an unplaced unit, so the target row is all unknown."""
    cond = build_graph(scene)
    v = len(cond.nodes)
    if v == 0:
        raise ValueError("scene produces no relation nodes to condition on")
    return _assemble(
        source=source,
        target_unit_id=-1,
        target_category=-1,
        cond_scene=scene,
        cond=cond,
        target_row=np.zeros(v, dtype=np.int64),
        target_dist=np.zeros(v, dtype=np.float64),
        resolution=resolution,
    )


def make_samples(
    scene: Scene,
    source: str = "",
    resolution: int = DESK_RESOLUTION,
    designated_unit_id: int | None = None,
) -> list[TrainSample]:
    """One sample per architectural node held out in turn (or only the
    designated unit's node). Scenes whose conditioning graph would be empty
    are skipped."""
    catalog = scene.catalog
    full = build_graph(scene)
    samples = []
    for held in full.nodes:
        if catalog[held.category_id].kind is not UnitKind.ARCHITECTURAL:
            continue
        if designated_unit_id is not None and designated_unit_id not in held.member_unit_ids:
            continue
        cond_scene = Scene(
            grid_w=scene.grid_w,
            grid_h=scene.grid_h,
            catalog=catalog,
            units=[u for u in scene.units if u.unit_id not in held.member_unit_ids],
            forbidden_mask=scene.forbidden_mask,
        )
        cond = build_graph(cond_scene)
        v = len(cond.nodes)
        if v == 0:
            continue
        # Conditioning nodes keep their merged identity when one unit leaves,
        # so the full graph's rows map onto them by member-unit identity.
        full_index = {node.member_unit_ids: node.node_id for node in full.nodes}
        target_row = np.zeros(v, dtype=np.int64)
        target_dist = np.zeros(v, dtype=np.float64)
        full_edges = {(e.src_node_id, e.dst_node_id): e for e in full.edges}
        for node in cond.nodes:
            src_full = full_index[node.member_unit_ids]
            edge = full_edges.get((src_full, held.node_id))
            if edge is not None:
                target_row[node.node_id] = edge.type_index
                target_dist[node.node_id] = edge.distance
        samples.append(
            _assemble(
                source=source,
                target_unit_id=held.member_unit_ids[0],
                target_category=held.category_id,
                cond_scene=cond_scene,
                cond=cond,
                target_row=target_row,
                target_dist=target_dist,
                resolution=resolution,
            )
        )
    return samples


def pack_batch(samples: list[TrainSample], n_max: int, dtype=torch.float32) -> PackedBatch:
    """Flat-pack samples: nodes ordered [sample 0 existing..., sample 0 new,
    sample 1 existing..., ...]; synthetic unknown edges connect each new node
    mutually with its sample's existing nodes."""
    conn_parts, attr_parts, targets = [], [], []
    edge_cols, edge_attr_parts = [], []
    node_sample, exist_mask, new_index = [], [], []
    offset = 0
    for z, s in enumerate(samples):
        v = s.n_nodes
        if v + 1 > n_max:
            raise ValueError(f"graph of {v} nodes exceeds the model limit {n_max}")
        conn = np.zeros((v, EDGE_CLASSES, n_max), dtype=np.float32)
        conn[:, :, :v] = s.conn_rows
        conn_parts.append(conn)
        attr_parts.append(s.node_attrs)
        targets.append(s.target_row)
        new = offset + v
        edge_cols.append(s.edge_index + offset)
        edge_attr_parts.append(s.edge_attrs)
        synth = np.zeros((2, 2 * v), dtype=np.int64)
        synth[0, :v] = new
        synth[1, :v] = offset + np.arange(v)
        synth[0, v:] = offset + np.arange(v)
        synth[1, v:] = new
        edge_cols.append(synth)
        synth_attrs = np.zeros((2 * v, EDGE_ATTR_DIM), dtype=np.float32)
        synth_attrs[:, UNKNOWN_FLAG] = 1.0
        edge_attr_parts.append(synth_attrs)
        node_sample.extend([z] * (v + 1))
        exist_mask.extend([True] * v + [False])
        new_index.append(new)
        offset += v + 1
    return PackedBatch(
        conn_rows=torch.from_numpy(np.concatenate(conn_parts)).to(dtype),
        node_attrs=torch.from_numpy(np.concatenate(attr_parts)).to(dtype),
        edge_index=torch.from_numpy(np.concatenate(edge_cols, axis=1)),
        edge_attrs=torch.from_numpy(np.concatenate(edge_attr_parts)).to(dtype),
        node_sample=torch.tensor(node_sample, dtype=torch.int64),
        exist_mask=torch.tensor(exist_mask, dtype=torch.bool),
        new_index=torch.tensor(new_index, dtype=torch.int64),
        targets=torch.from_numpy(np.concatenate(targets)),
        n_samples=len(samples),
    )
