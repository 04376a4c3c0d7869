"""Scene data model: oriented boxes on an integer grid plus a forbidden mask.

Coordinates are grid units with the origin at the lower-left corner; a box
(x, y, w, h) covers the half-open region [x, x+w) x [y, y+h).  Orientation
is a quantized heading in {0, 90, 180, 270} degrees, measured
counter-clockwise from +x; a unit's "front" side faces its heading and the
other sides rotate with it.  The forbidden mask is indexed mask[x, y].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .catalog import Catalog, UnitKind

ORIENTATIONS = (0, 90, 180, 270)

# Distance-bin thresholds in grid units at the reference grid width.
REFERENCE_GRID_W = 165
NEXT_TO_MAX = 0.0
ADJACENT_MAX = 30.0
PROXIMAL_MAX = 80.0


class DistanceBin(IntEnum):
    NEXT_TO = 0
    ADJACENT = 1
    PROXIMAL = 2
    DISTANT = 3


@dataclass(frozen=True)
class OBB:
    """Axis-realized rectangle; orientation lives on the owning Unit."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"OBB extents must be positive, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)


@dataclass(frozen=True)
class Unit:
    unit_id: int
    category_id: int
    obb: OBB
    orientation: int = 0

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {self.orientation}")


@dataclass
class Scene:
    grid_w: int
    grid_h: int
    catalog: Catalog
    units: list[Unit] = field(default_factory=list)
    forbidden_mask: np.ndarray | None = None  # bool, shape (grid_w, grid_h)

    def __post_init__(self):
        if self.forbidden_mask is None:
            self.forbidden_mask = np.zeros((self.grid_w, self.grid_h), dtype=bool)
        else:
            self.forbidden_mask = np.asarray(self.forbidden_mask, dtype=bool)
            if self.forbidden_mask.shape != (self.grid_w, self.grid_h):
                raise ValueError(
                    f"forbidden mask shape {self.forbidden_mask.shape} does not match "
                    f"grid ({self.grid_w}, {self.grid_h})"
                )

    def unit_by_id(self, unit_id: int) -> Unit:
        for u in self.units:
            if u.unit_id == unit_id:
                return u
        raise KeyError(f"no unit with id {unit_id}")

    def without_unit(self, unit_id: int) -> "Scene":
        return Scene(
            self.grid_w,
            self.grid_h,
            self.catalog,
            [u for u in self.units if u.unit_id != unit_id],
            self.forbidden_mask.copy(),
        )

    def distance_scale(self) -> float:
        """Proportional rescaling of the distance-bin thresholds for grids
        narrower or wider than the reference width."""
        return self.grid_w / REFERENCE_GRID_W


@dataclass(frozen=True)
class Violation:
    kind: str  # "duplicate_id" | "out_of_bounds" | "overlap" | "forbidden"
    message: str
    unit_ids: tuple[int, ...] = ()
    cells: tuple[tuple[int, int], ...] = ()


def boxes_overlap(a: OBB, b: OBB) -> bool:
    """Positive-area intersection; touching edges do not count."""
    return a.x < b.x2 and b.x < a.x2 and a.y < b.y2 and b.y < a.y2


def obb_distance(a: OBB, b: OBB) -> float:
    """Minimum Euclidean separation of two rectangles; 0 when they touch
    or overlap."""
    dx = max(a.x - b.x2, b.x - a.x2, 0.0)
    dy = max(a.y - b.y2, b.y - a.y2, 0.0)
    return math.hypot(dx, dy)


def classify_distance(d: float, scale: float = 1.0) -> DistanceBin:
    """Bin a box-to-box distance.  `scale` rescales the thresholds
    proportionally for non-reference grid sizes."""
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    if d == 0:
        return DistanceBin.NEXT_TO
    if d <= ADJACENT_MAX * scale:
        return DistanceBin.ADJACENT
    if d <= PROXIMAL_MAX * scale:
        return DistanceBin.PROXIMAL
    return DistanceBin.DISTANT


def bin_interval(bin_: DistanceBin, scale: float = 1.0) -> tuple[float, float]:
    """Half-open (closed-on-right) distance interval covered by a bin."""
    edges = [0.0, 0.0, ADJACENT_MAX * scale, PROXIMAL_MAX * scale, math.inf]
    lo = edges[bin_.value]
    hi = edges[bin_.value + 1]
    return lo, hi


def footprint_cells(obb: OBB) -> tuple[slice, slice]:
    """Grid-cell slices covered by an integer-aligned box."""
    return (
        slice(int(math.floor(obb.x)), int(math.ceil(obb.x2))),
        slice(int(math.floor(obb.y)), int(math.ceil(obb.y2))),
    )


def validate_scene(scene: Scene) -> list[Violation]:
    """Check every scene invariant; violations are data, not errors."""
    violations: list[Violation] = []

    seen: dict[int, int] = {}
    for u in scene.units:
        if u.unit_id in seen:
            violations.append(
                Violation("duplicate_id", f"unit id {u.unit_id} appears more than once", (u.unit_id,))
            )
        seen[u.unit_id] = u.unit_id

    for u in scene.units:
        if u.obb.x < 0 or u.obb.y < 0 or u.obb.x2 > scene.grid_w or u.obb.y2 > scene.grid_h:
            violations.append(
                Violation(
                    "out_of_bounds",
                    f"unit {u.unit_id} box ({u.obb.x},{u.obb.y},{u.obb.w},{u.obb.h}) "
                    f"leaves the {scene.grid_w}x{scene.grid_h} grid",
                    (u.unit_id,),
                )
            )

    n = len(scene.units)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = scene.units[i], scene.units[j]
            if boxes_overlap(a.obb, b.obb):
                violations.append(
                    Violation(
                        "overlap",
                        f"units {a.unit_id} and {b.unit_id} overlap",
                        (a.unit_id, b.unit_id),
                    )
                )

    for u in scene.units:
        sx, sy = footprint_cells(u.obb)
        sx = slice(max(sx.start, 0), min(sx.stop, scene.grid_w))
        sy = slice(max(sy.start, 0), min(sy.stop, scene.grid_h))
        if sx.start >= sx.stop or sy.start >= sy.stop:
            continue
        hit = scene.forbidden_mask[sx, sy]
        if hit.any():
            xs, ys = np.nonzero(hit)
            cells = tuple(
                (int(x) + sx.start, int(y) + sy.start) for x, y in zip(xs[:8], ys[:8])
            )
            violations.append(
                Violation(
                    "forbidden",
                    f"unit {u.unit_id} covers {int(hit.sum())} forbidden cell(s)",
                    (u.unit_id,),
                    cells,
                )
            )

    return violations


def heading_vector(orientation: int) -> tuple[int, int]:
    """Unit vector of a quantized heading."""
    return {0: (1, 0), 90: (0, 1), 180: (-1, 0), 270: (0, -1)}[orientation]


def rotate_to_frame(vec: tuple[int, int], orientation: int) -> tuple[int, int]:
    """Express a world-frame axis vector in the frame of a unit with the
    given heading (inverse rotation)."""
    x, y = vec
    if orientation == 0:
        return (x, y)
    if orientation == 90:
        return (y, -x)
    if orientation == 180:
        return (-x, -y)
    return (-y, x)
