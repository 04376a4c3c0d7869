"""Heatmap quality metrics and placement-validity measures.

Area scores compare nonzero supports; probability scores compare mass
via the elementwise minimum.  Both run on normalized (pre-display)
maps.  All scores are 0-guarded: degenerate inputs yield 0, never NaN.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .heatmap import Heatmap
from .scene import Scene, footprint_cells


@dataclass(frozen=True)
class ScoreRow:
    ar: float
    ap: float
    f1s_a: float
    pr: float
    pp: float
    f1s_p: float
    forbidden_overlap: float
    collision_overlap: float

    def to_doc(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _f1(recall: float, precision: float) -> float:
    if recall <= 0.0 or precision <= 0.0:
        return 0.0
    return 2.0 / (1.0 / recall + 1.0 / precision)


def f1_area(ht_r: Heatmap, ht_p: Heatmap) -> tuple[float, float, float]:
    """(area recall, area precision, f1) over nonzero supports."""
    if ht_r.values.shape != ht_p.values.shape:
        raise ValueError("heatmap shapes differ")
    support_r = ht_r.values > 0
    support_p = ht_p.values > 0
    n_r = int(support_r.sum())
    n_p = int(support_p.sum())
    overlap = int((support_r & support_p).sum())
    ar = overlap / n_r if n_r else 0.0
    ap = overlap / n_p if n_p else 0.0
    return ar, ap, _f1(ar, ap)


def f1_prob(ht_r: Heatmap, ht_p: Heatmap) -> tuple[float, float, float]:
    """(probability recall, precision, f1) via the min-mass intersection."""
    if ht_r.values.shape != ht_p.values.shape:
        raise ValueError("heatmap shapes differ")
    # min() is zero outside the support intersection, so the full-array
    # sum equals the intersection sum while keeping summation order
    # identical to the denominators (exactness on self-comparison).
    num = float(np.minimum(ht_r.values, ht_p.values).sum(dtype=np.float64))
    sum_r = float(ht_r.values.sum(dtype=np.float64))
    sum_p = float(ht_p.values.sum(dtype=np.float64))
    pr = num / sum_r if sum_r > 0 else 0.0
    pp = num / sum_p if sum_p > 0 else 0.0
    return pr, pp, _f1(pr, pp)


def placement_validity(hm: Heatmap, scene: Scene) -> tuple[float, float]:
    """(forbidden mass fraction, existing-unit collision mass fraction)."""
    total = float(hm.values.sum())
    if total <= 0.0:
        return 0.0, 0.0
    forbidden_mass = float(hm.values[scene.forbidden_mask].sum())
    occupied = np.zeros_like(scene.forbidden_mask)
    for unit in scene.units:
        xs, ys = footprint_cells(unit.obb)
        occupied[xs, ys] = True
    collision_mass = float(hm.values[occupied].sum())
    return forbidden_mass / total, collision_mass / total


def score_pair(ht_r: Heatmap, ht_p: Heatmap, scene: Scene) -> ScoreRow:
    ar, ap, f1s_a = f1_area(ht_r, ht_p)
    pr, pp, f1s_p = f1_prob(ht_r, ht_p)
    forbidden, collision = placement_validity(ht_p, scene)
    return ScoreRow(
        ar=ar,
        ap=ap,
        f1s_a=f1s_a,
        pr=pr,
        pp=pp,
        f1s_p=f1s_p,
        forbidden_overlap=forbidden,
        collision_overlap=collision,
    )
