"""Decode edge sets into placement heatmaps.

Every edge "source node --(direction, distance)--> new node" votes for a
target-size rectangle placed off the source's side in the source's own
frame, laterally centered on that side.  Votes are uniform and weighted
1/|edges|; the summed map is normalized to a peak of exactly 1.  Cells
are included when the rectangle covers at least half of them, with ties
included on both sides so mirrored inputs give mirrored maps.

Ground-truth edges carry their exact extracted distance; predicted
edges only carry a distance bin and use its representative distance
(0 / 15 / 55 / 105 at reference scale).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import convolve

from .graph import Direction, RelationNode, decode_edge_type
from .scene import OBB, Scene

TARGET_SIZE_REFERENCE = (24, 24)
BIN_REPRESENTATIVE = (0.0, 15.0, 55.0, 105.0)  # indexed by DistanceBin
DISPLAY_THRESHOLD = 0.5
SMOOTH_KERNEL_SIZE = 5
SMOOTH_SIGMA = 1.0

_LOCAL_DIRECTION_VECTOR = {
    Direction.FRONT: (1, 0),
    Direction.BACK: (-1, 0),
    Direction.RIGHT: (0, -1),
    Direction.LEFT: (0, 1),
}


@dataclass(frozen=True)
class Heatmap:
    values: np.ndarray  # (grid_w, grid_h) float32, indexed [x, y]
    provenance: str  # raw | normalized | display

    @property
    def grid_w(self) -> int:
        return self.values.shape[0]

    @property
    def grid_h(self) -> int:
        return self.values.shape[1]

    def peak(self) -> tuple[int, int]:
        """Grid cell of the maximum (first in x-then-y scan order)."""
        flat = int(np.argmax(self.values))
        x, y = np.unravel_index(flat, self.values.shape)
        return int(x), int(y)


def default_target_size(scene: Scene) -> tuple[int, int]:
    s = scene.distance_scale()
    return (
        max(1, int(round(TARGET_SIZE_REFERENCE[0] * s))),
        max(1, int(round(TARGET_SIZE_REFERENCE[1] * s))),
    )


def representative_distance(bin_index: int, scale: float) -> float:
    return BIN_REPRESENTATIVE[bin_index] * scale


def _world_normal(direction: Direction, orientation: int) -> tuple[int, int]:
    lx, ly = _LOCAL_DIRECTION_VECTOR[direction]
    if orientation == 0:
        return lx, ly
    if orientation == 90:
        return -ly, lx
    if orientation == 180:
        return -lx, -ly
    return ly, -lx


def _coverage_cells(lo: float, hi: float, n_cells: int) -> tuple[int, int]:
    """Cells whose overlap with [lo, hi) is >= half a cell (ties included)."""
    c_lo = int(math.ceil(lo - 0.5))
    c_hi = int(math.floor(hi - 0.5))
    return max(c_lo, 0), min(c_hi, n_cells - 1)


def edge_to_footprint(
    source_obb: OBB,
    source_orientation: int,
    direction: Direction,
    distance: float,
    target_size: tuple[int, int],
    grid_w: int,
    grid_h: int,
) -> tuple[slice, slice] | None:
    """Grid region the edge points to, or None when fully clipped."""
    tw, th = target_size
    nx, ny = _world_normal(direction, source_orientation)
    if nx > 0:
        x0 = source_obb.x2 + distance
        y0 = source_obb.y + source_obb.h / 2.0 - th / 2.0
        rect = (x0, y0, x0 + tw, y0 + th)
    elif nx < 0:
        x1 = source_obb.x - distance
        y0 = source_obb.y + source_obb.h / 2.0 - th / 2.0
        rect = (x1 - tw, y0, x1, y0 + th)
    elif ny > 0:
        y0 = source_obb.y2 + distance
        x0 = source_obb.x + source_obb.w / 2.0 - tw / 2.0
        rect = (x0, y0, x0 + tw, y0 + th)
    else:
        y1 = source_obb.y - distance
        x0 = source_obb.x + source_obb.w / 2.0 - tw / 2.0
        rect = (x0, y1 - th, x0 + tw, y1)

    cx0, cx1 = _coverage_cells(rect[0], rect[2], grid_w)
    cy0, cy1 = _coverage_cells(rect[1], rect[3], grid_h)
    if cx0 > cx1 or cy0 > cy1:
        return None
    return slice(cx0, cx1 + 1), slice(cy0, cy1 + 1)


@dataclass(frozen=True)
class HeatmapEdge:
    """One decoded vote: a source box/frame plus where the edge points."""

    source_obb: OBB
    source_orientation: int
    direction: Direction
    distance: float


def edges_to_heatmap(
    edges: list[HeatmapEdge], grid_w: int, grid_h: int, target_size: tuple[int, int]
) -> tuple[Heatmap, bool]:
    """Normalized heatmap plus a flag: True when every footprint clipped away."""
    if not edges:
        raise ValueError("edges_to_heatmap needs at least one edge")
    values = np.zeros((grid_w, grid_h), dtype=np.float64)
    weight = 1.0 / len(edges)
    deposited = False
    for e in edges:
        region = edge_to_footprint(
            e.source_obb, e.source_orientation, e.direction, e.distance, target_size, grid_w, grid_h
        )
        if region is None:
            continue
        values[region] += weight
        deposited = True
    peak = values.max()
    if peak > 0:
        values /= peak
    return Heatmap(values=values.astype(np.float32), provenance="normalized"), not deposited


def _gaussian_kernel(size: int = SMOOTH_KERNEL_SIZE, sigma: float = SMOOTH_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.exp(-((np.arange(size) - half) ** 2) / (2.0 * sigma * sigma))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def postprocess(hm: Heatmap) -> Heatmap:
    """Display map: drop weak cells, smooth, renormalize to peak 1."""
    kept = np.where(hm.values > DISPLAY_THRESHOLD, hm.values, 0.0).astype(np.float64)
    smoothed = convolve(kept, _gaussian_kernel(), mode="constant", cval=0.0)
    peak = smoothed.max()
    if peak > 0:
        smoothed /= peak
    return Heatmap(values=smoothed.astype(np.float32), provenance="display")


def heatmap_from_labels(
    nodes: list[RelationNode],
    labels: np.ndarray,
    scene: Scene,
    target_size: tuple[int, int] | None = None,
    exact_distances: np.ndarray | None = None,
) -> tuple[Heatmap, bool]:
    """Decode a per-node class row (0 = no edge, 1..16 = edge type).

    With ``exact_distances`` (ground truth) the stored distance is used;
    otherwise each bin's representative distance stands in (prediction).
    """
    if target_size is None:
        target_size = default_target_size(scene)
    scale = scene.distance_scale()
    edges = []
    for node, label in zip(nodes, labels.tolist()):
        if label == 0:
            continue
        direction, bin_ = decode_edge_type(int(label))
        if exact_distances is not None:
            d = float(exact_distances[node.node_id])
        else:
            d = representative_distance(int(bin_), scale)
        edges.append(HeatmapEdge(node.merged_obb, node.orientation, direction, d))
    if not edges:
        return (
            Heatmap(values=np.zeros((scene.grid_w, scene.grid_h), dtype=np.float32), provenance="normalized"),
            True,
        )
    return edges_to_heatmap(edges, scene.grid_w, scene.grid_h, target_size)


def save_heatmap(hm: Heatmap, path: str | Path) -> None:
    np.savez_compressed(Path(path), values=hm.values, provenance=np.asarray(hm.provenance))


def load_heatmap(path: str | Path) -> Heatmap:
    with np.load(Path(path)) as archive:
        return Heatmap(values=archive["values"].astype(np.float32), provenance=str(archive["provenance"]))


def export_overlay_png(hm: Heatmap, scene: Scene, path: str | Path, resolution: int = 256) -> None:
    """8-bit inspection overlay: heatmap alpha-blended over the depth render."""
    from PIL import Image

    from .render import render_topdown

    img = render_topdown(scene, resolution)
    base = np.clip(img.depth * 160.0 + img.forbidden * 60.0, 0.0, 255.0)
    # Resample the heatmap with the same letterbox transform.
    px = np.arange(resolution, dtype=np.float64) + 0.5
    gx = np.floor((px - img.off_x) / img.scale).astype(np.int64)
    gy = np.floor(scene.grid_h - (px - img.off_y) / img.scale).astype(np.int64)
    ok_x = (gx >= 0) & (gx < scene.grid_w)
    ok_y = (gy >= 0) & (gy < scene.grid_h)
    hm_px = np.where(
        ok_y[:, None] & ok_x[None, :],
        hm.values[np.clip(gx, 0, scene.grid_w - 1)[None, :], np.clip(gy, 0, scene.grid_h - 1)[:, None]],
        0.0,
    )
    blended = np.clip(base * 0.55 + hm_px * 255.0 * 0.45, 0.0, 255.0)
    Image.fromarray(blended.astype(np.uint8), mode="L").save(Path(path))
