import math

import numpy as np
import pytest

from siterec.catalog import desk_catalog
from siterec.graph import Direction, build_graph, edge_type_index
from siterec.heatmap import (
    Heatmap,
    HeatmapEdge,
    default_target_size,
    edge_to_footprint,
    edges_to_heatmap,
    heatmap_from_labels,
    load_heatmap,
    postprocess,
    representative_distance,
    save_heatmap,
)
from siterec.scene import OBB, DistanceBin, Scene, Unit

CAT = desk_catalog()


def mk_scene(units, grid=64):
    return Scene(grid, grid, CAT, units, np.zeros((grid, grid), dtype=bool))


# ---------------------------------------------------------------------------
# Footprint placement


def test_footprint_hand_example():
    region = edge_to_footprint(OBB(0, 0, 10, 10), 0, Direction.FRONT, 0.0, (4, 4), 64, 64)
    xs, ys = region
    assert (xs.start, xs.stop) == (10, 14)
    assert (ys.start, ys.stop) == (3, 7)


def test_footprint_each_direction():
    src = OBB(20, 20, 10, 10)
    front = edge_to_footprint(src, 0, Direction.FRONT, 2.0, (4, 4), 64, 64)
    back = edge_to_footprint(src, 0, Direction.BACK, 2.0, (4, 4), 64, 64)
    left = edge_to_footprint(src, 0, Direction.LEFT, 2.0, (4, 4), 64, 64)
    right = edge_to_footprint(src, 0, Direction.RIGHT, 2.0, (4, 4), 64, 64)
    assert (front[0].start, front[0].stop) == (32, 36)
    assert (back[0].start, back[0].stop) == (14, 18)
    assert (left[1].start, left[1].stop) == (32, 36)
    assert (right[1].start, right[1].stop) == (14, 18)
    for region in (front, back):
        assert (region[1].start, region[1].stop) == (23, 27)


def test_footprint_rotates_with_orientation():
    src = OBB(20, 20, 10, 10)
    # Facing north: FRONT points +y.
    region = edge_to_footprint(src, 90, Direction.FRONT, 0.0, (4, 4), 64, 64)
    assert (region[1].start, region[1].stop) == (30, 34)
    assert (region[0].start, region[0].stop) == (23, 27)
    # Facing west: FRONT points -x.
    region = edge_to_footprint(src, 180, Direction.FRONT, 0.0, (4, 4), 64, 64)
    assert (region[0].start, region[0].stop) == (16, 20)


def test_footprint_clipping():
    # Far beyond the grid: fully clipped.
    assert edge_to_footprint(OBB(0, 0, 10, 10), 0, Direction.FRONT, 100.0, (4, 4), 64, 64) is None
    # Partially clipped keeps the inside part.
    region = edge_to_footprint(OBB(0, 0, 10, 10), 0, Direction.FRONT, 52.0, (6, 6), 64, 64)
    xs, _ = region
    assert xs.stop == 64 and xs.start == 62


def test_footprint_half_coverage_ties_widen_symmetrically():
    # Side length 5 centers a width-4 footprint on a half-integer: both
    # half-covered end cells are kept.
    region = edge_to_footprint(OBB(0, 0, 10, 5), 0, Direction.FRONT, 0.0, (4, 4), 64, 64)
    _, ys = region
    assert (ys.start, ys.stop) == (0, 5)


def test_representative_distances():
    assert representative_distance(int(DistanceBin.NEXT_TO), 1.0) == 0.0
    assert representative_distance(int(DistanceBin.ADJACENT), 1.0) == 15.0
    assert representative_distance(int(DistanceBin.PROXIMAL), 1.0) == 55.0
    assert representative_distance(int(DistanceBin.DISTANT), 0.5) == 52.5


def test_default_target_size_scales():
    sc = mk_scene([])
    assert default_target_size(sc) == (9, 9)
    full = Scene(165, 183, CAT, [], np.zeros((165, 183), dtype=bool))
    assert default_target_size(full) == (24, 24)


# ---------------------------------------------------------------------------
# Heatmap accumulation


def test_single_edge_footprint_is_one():
    e = HeatmapEdge(OBB(10, 10, 8, 6), 0, Direction.FRONT, 2.0)
    hm, empty = edges_to_heatmap([e], 64, 64, (4, 4))
    assert not empty
    assert hm.values.max() == 1.0
    assert set(np.unique(hm.values)) == {0.0, 1.0}
    assert hm.values.sum() == 16.0


def test_identical_edges_stack_to_one():
    e = HeatmapEdge(OBB(10, 10, 8, 6), 0, Direction.FRONT, 2.0)
    hm, _ = edges_to_heatmap([e, e], 64, 64, (4, 4))
    assert hm.values.max() == 1.0
    assert hm.values.sum() == 16.0


def test_disjoint_edges_normalize_to_one_each():
    e1 = HeatmapEdge(OBB(10, 10, 8, 6), 0, Direction.FRONT, 2.0)
    e2 = HeatmapEdge(OBB(40, 40, 8, 6), 0, Direction.FRONT, 2.0)
    hm, _ = edges_to_heatmap([e1, e2], 64, 64, (4, 4))
    assert hm.values.max() == 1.0
    assert int((hm.values == 1.0).sum()) == 32  # both regions at the peak


def test_all_clipped_flags_empty():
    e = HeatmapEdge(OBB(0, 0, 10, 10), 0, Direction.FRONT, 500.0, )
    hm, empty = edges_to_heatmap([e], 64, 64, (4, 4))
    assert empty
    assert not hm.values.any()


def test_mirror_symmetry():
    # Mirror scene+edges about the vertical axis: heatmap mirrors exactly.
    grid = 64
    edges = [
        HeatmapEdge(OBB(10, 12, 8, 6), 0, Direction.FRONT, 3.0),
        HeatmapEdge(OBB(30, 40, 5, 4), 90, Direction.LEFT, 7.0),
    ]
    mirrored = []
    flip = {Direction.FRONT: Direction.BACK, Direction.BACK: Direction.FRONT,
            Direction.LEFT: Direction.LEFT, Direction.RIGHT: Direction.RIGHT}
    mirror_orient = {0: 180, 90: 90, 180: 0, 270: 270}
    for e in edges:
        obb = OBB(grid - e.source_obb.x2, e.source_obb.y, e.source_obb.w, e.source_obb.h)
        mirrored.append(
            HeatmapEdge(obb, e.source_orientation, flip[e.direction], e.distance)
            if e.source_orientation in (0, 180)
            else HeatmapEdge(obb, e.source_orientation, {Direction.LEFT: Direction.RIGHT, Direction.RIGHT: Direction.LEFT}.get(e.direction, e.direction), e.distance)
        )
    hm, _ = edges_to_heatmap(edges, grid, grid, (5, 5))
    hm_m, _ = edges_to_heatmap(mirrored, grid, grid, (5, 5))
    assert np.array_equal(hm_m.values, hm.values[::-1, :])


def test_mass_bound():
    edges = [
        HeatmapEdge(OBB(10, 10, 8, 6), 0, Direction.FRONT, 2.0),
        HeatmapEdge(OBB(40, 40, 8, 6), 0, Direction.BACK, 10.0),
        HeatmapEdge(OBB(5, 50, 4, 4), 90, Direction.RIGHT, 1.0),
    ]
    values = np.zeros((64, 64))
    weight = 1.0 / len(edges)
    for e in edges:
        region = edge_to_footprint(e.source_obb, e.source_orientation, e.direction, e.distance, (6, 6), 64, 64)
        values[region] += weight
    assert values.sum() <= 6 * 6 + 1e-9


# ---------------------------------------------------------------------------
# Postprocess


def test_postprocess_threshold_drops_uniform_map():
    hm = Heatmap(values=np.full((16, 16), 0.4, dtype=np.float32), provenance="normalized")
    out = postprocess(hm)
    assert not out.values.any()


def test_postprocess_single_peak_fixture():
    values = np.zeros((16, 16), dtype=np.float32)
    values[8, 8] = 1.0
    out = postprocess(Heatmap(values=values, provenance="normalized"))
    # Hand-computed separable Gaussian (sigma=1): ratios exp(-k^2/2).
    g = np.exp(-np.array([2, 1, 0, 1, 2]) ** 2 / 2.0)
    expected = np.zeros((16, 16))
    expected[6:11, 6:11] = np.outer(g, g) / np.outer(g, g).max()
    assert np.allclose(out.values, expected, atol=1e-6)
    assert out.values.max() == 1.0
    assert out.peak() == (8, 8)


def test_postprocess_keeps_peak_stable():
    values = np.zeros((16, 16), dtype=np.float32)
    values[4, 9] = 1.0
    values[12, 3] = 0.45  # below threshold, disappears
    once = postprocess(Heatmap(values=values, provenance="normalized"))
    twice = postprocess(once)
    assert once.peak() == (4, 9)
    assert twice.peak() == (4, 9)
    assert twice.values.max() == 1.0
    assert not once.values[10:, :6].any()


# ---------------------------------------------------------------------------
# Label-row decoding


def test_heatmap_from_labels_exact_vs_representative():
    sc = mk_scene([Unit(0, 8, OBB(10, 20, 5, 4), 0), Unit(1, 8, OBB(24, 20, 5, 4), 0)])
    graph = build_graph(sc)
    labels = np.zeros(2, dtype=np.int64)
    labels[0] = edge_type_index(Direction.FRONT, DistanceBin.ADJACENT)
    exact = np.array([4.0, 0.0])
    hm_gt, empty = heatmap_from_labels(graph.nodes, labels, sc, exact_distances=exact)
    hm_pred, _ = heatmap_from_labels(graph.nodes, labels, sc)
    assert not empty
    # Exact distance 4 puts the footprint closer than the representative.
    xs_gt = np.nonzero(hm_gt.values.any(axis=1))[0]
    xs_pred = np.nonzero(hm_pred.values.any(axis=1))[0]
    assert xs_gt.min() < xs_pred.min()


def test_heatmap_from_labels_all_zero_row():
    sc = mk_scene([Unit(0, 8, OBB(10, 20, 5, 4), 0)])
    graph = build_graph(sc)
    hm, empty = heatmap_from_labels(graph.nodes, np.zeros(1, dtype=np.int64), sc)
    assert empty and not hm.values.any()


def test_save_load_round_trip(tmp_path):
    values = np.random.default_rng(0).random((32, 32)).astype(np.float32)
    hm = Heatmap(values=values / values.max(), provenance="normalized")
    save_heatmap(hm, tmp_path / "h.npz")
    back = load_heatmap(tmp_path / "h.npz")
    assert np.array_equal(back.values, hm.values)
    assert back.provenance == "normalized"
