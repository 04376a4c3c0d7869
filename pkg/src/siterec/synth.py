"""Procedural generator of residential-layout scenes with planted rules.

Each scene is built from rule templates so the "correct" location of a
designated held-out unit is known and exportable:

* row rule: a row of evenly spaced cabins with one open end slot and a
  pool blocking the opposite end slot.  The held-out cabin belongs in
  the open slot.  Which end is open is an independent coin flip, the
  row position is sampled before the flip, and decoration avoids both
  end regions symmetrically.  On a marker_fraction of scenes a bench is
  placed against the open end, putting the open side into the unit
  layout itself; on the rest nothing in the layout gives it away and
  only the rendered forbidden channel does.
* symmetry rule: a gazebo pair mirrored about the vertical grid axis;
  the held-out unit is one of the pair, so its location is fully
  determined by the conditioning graph (the twin).
* fence rule: runs of touching fence segments (exercises node merging).

Scene content never depends on which unit ends up designated: all enabled
constructs are built first, then one candidate is drawn (the row cabin
with probability row_fraction, else a pair gazebo).  The two tasks are
distinguishable from the conditioning scene alone -- a missing row cabin
leaves the pair intact, a missing gazebo leaves the row complete.

Scenes returned always pass validate_scene.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .catalog import Catalog, UnitKind, get_catalog
from .scene import OBB, Scene, Unit, boxes_overlap, validate_scene
from .sceneio import dumps_canonical, read_scene, scene_to_doc, write_scene

MANIFEST_FORMAT = "siterec.manifest/1"
RULES_FORMAT = "siterec.rules/1"

CABIN = 8  # row-unit category
GAZEBO = 10
MARKER = 5  # bench marking the open row end

# (conditioning cabins, spacing) combinations that fit a 64-wide grid
# with both end slots and pool margins.
_ROW_COMBOS = ((3, 4), (3, 5), (3, 6), (4, 4), (4, 5))


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    grid_w: int = 64
    grid_h: int = 64
    catalog_name: str = "desk12"
    row_rule: bool = True
    symmetry_rule: bool = True
    fence_rule: bool = True
    row_fraction: float = 1.0  # P(designate the row cabin) when both rules built
    marker_fraction: float = 0.35  # P(a bench marks the open row end)
    pool_margin: int = 2
    units_range: tuple[int, int] = (10, 16)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.units_range
        if not (1 <= lo <= hi):
            raise ValueError(f"units_range must be a non-empty range, got {self.units_range}")
        for name in ("row_fraction", "marker_fraction"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {getattr(self, name)}")
        if self.pool_margin < 0:
            raise ValueError("pool_margin must be >= 0")

    def catalog(self) -> Catalog:
        return get_catalog(self.catalog_name)

    def to_doc(self) -> dict:
        return {
            "grid_w": self.grid_w,
            "grid_h": self.grid_h,
            "catalog": self.catalog_name,
            "row_rule": self.row_rule,
            "symmetry_rule": self.symmetry_rule,
            "fence_rule": self.fence_rule,
            "row_fraction": self.row_fraction,
            "marker_fraction": self.marker_fraction,
            "pool_margin": self.pool_margin,
            "units_range": list(self.units_range),
            "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "GeneratorConfig":
        return cls(
            grid_w=int(doc["grid_w"]),
            grid_h=int(doc["grid_h"]),
            catalog_name=str(doc["catalog"]),
            row_rule=bool(doc["row_rule"]),
            symmetry_rule=bool(doc["symmetry_rule"]),
            fence_rule=bool(doc["fence_rule"]),
            row_fraction=float(doc.get("row_fraction", 1.0)),
            marker_fraction=float(doc.get("marker_fraction", 0.0)),
            pool_margin=int(doc["pool_margin"]),
            units_range=tuple(int(v) for v in doc["units_range"]),
            seed=int(doc["seed"]),
        )


@dataclass(frozen=True)
class HeldOutPlacement:
    unit_id: int
    category_id: int
    obb: OBB
    orientation: int
    rule: str  # row | symmetry | free
    correct_region: tuple[int, int, int, int]  # x0, y0, x1, y1

    def to_doc(self) -> dict:
        return {
            "format": RULES_FORMAT,
            "unit_id": self.unit_id,
            "category": self.category_id,
            "obb": [self.obb.x, self.obb.y, self.obb.w, self.obb.h],
            "orientation": self.orientation,
            "rule": self.rule,
            "correct_region": list(self.correct_region),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "HeldOutPlacement":
        return cls(
            unit_id=int(doc["unit_id"]),
            category_id=int(doc["category"]),
            obb=OBB(*doc["obb"]),
            orientation=int(doc["orientation"]),
            rule=str(doc["rule"]),
            correct_region=tuple(int(v) for v in doc["correct_region"]),
        )


class _Builder:
    def __init__(self, config: GeneratorConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.catalog = config.catalog()
        self.boxes: list[OBB] = []
        self.units: list[Unit] = []
        self.mask = np.zeros((config.grid_w, config.grid_h), dtype=bool)
        self.keepout: list[OBB] = []  # regions decor must stay clear of

    def blocked(self, obb: OBB) -> bool:
        if obb.x < 0 or obb.y < 0 or obb.x2 > self.config.grid_w or obb.y2 > self.config.grid_h:
            return True
        if any(boxes_overlap(obb, b) for b in self.boxes + self.keepout):
            return True
        xs, ys = slice(int(obb.x), int(obb.x2)), slice(int(obb.y), int(obb.y2))
        return bool(self.mask[xs, ys].any())

    def add(self, category: int, obb: OBB, orientation: int = 0) -> Unit:
        unit = Unit(len(self.units), category, obb, orientation)
        self.units.append(unit)
        self.boxes.append(obb)
        return unit

    def try_add(self, category: int, w: int, h: int, orientation: int = 0, tries: int = 40) -> Unit | None:
        for _ in range(tries):
            x = int(self.rng.integers(0, self.config.grid_w - w + 1))
            y = int(self.rng.integers(0, self.config.grid_h - h + 1))
            obb = OBB(x, y, w, h)
            if not self.blocked(obb):
                return self.add(category, obb, orientation)
        return None


def _expand(obb: OBB, margin: int, grid_w: int, grid_h: int) -> OBB:
    x0 = max(0, obb.x - margin)
    y0 = max(0, obb.y - margin)
    x1 = min(grid_w, obb.x2 + margin)
    y1 = min(grid_h, obb.y2 + margin)
    return OBB(x0, y0, x1 - x0, y1 - y0)


def _build_row(b: _Builder) -> HeldOutPlacement:
    cfg = b.config
    rng = b.rng
    m = cfg.pool_margin
    cw, ch = b.catalog[CABIN].default_footprint
    n_cond, s = _ROW_COMBOS[int(rng.integers(0, len(_ROW_COMBOS)))]
    pitch = cw + s

    x_lo = pitch + m
    x_hi = cfg.grid_w - cw - m - n_cond * pitch
    y_lo, y_hi = m, cfg.grid_h - ch - m
    if x_hi < x_lo or y_hi < y_lo:
        raise GenerationError("grid too small for the row rule")
    x0 = int(rng.integers(x_lo, x_hi + 1))
    y_row = int(rng.integers(y_lo, y_hi + 1))

    for i in range(n_cond):
        b.add(CABIN, OBB(x0 + i * pitch, y_row, cw, ch), 0)

    # The open end is an independent coin flip; the layout above never
    # depends on it.
    open_right = bool(rng.random() < 0.5)
    slot_left = OBB(x0 - pitch, y_row, cw, ch)
    slot_right = OBB(x0 + n_cond * pitch, y_row, cw, ch)
    open_slot, pool_slot = (slot_right, slot_left) if open_right else (slot_left, slot_right)

    held_out = b.add(CABIN, open_slot, 0)
    pool_rect = _expand(pool_slot, m, cfg.grid_w, cfg.grid_h)
    b.mask[int(pool_rect.x) : int(pool_rect.x2), int(pool_rect.y) : int(pool_rect.y2)] = True
    if rng.random() < cfg.marker_fraction:
        _mark_open_end(b, open_slot)
    # Decor stays clear of both end regions so the unit layout is
    # symmetric about the row regardless of pool side (marker aside).
    b.keepout.append(_expand(open_slot, m, cfg.grid_w, cfg.grid_h))
    return _unit_placement(held_out, "row")


def _mark_open_end(b: _Builder, open_slot: OBB) -> None:
    """Bench one cell off the open slot: the only unit-layout asymmetry
    between the row ends, so it alone identifies the open side."""
    bw, bh = b.catalog[MARKER].default_footprint
    x = int(open_slot.x) + (int(open_slot.w) - bw) // 2
    above = OBB(x, int(open_slot.y) - bh - 1, bw, bh)
    below = OBB(x, int(open_slot.y2) + 1, bw, bh)
    for obb in (above, below):
        if not b.blocked(obb):
            b.add(MARKER, obb, 0)
            return


def _build_gazebo_pair(b: _Builder) -> tuple[Unit, Unit] | None:
    cfg = b.config
    gw, gh = b.catalog[GAZEBO].default_footprint
    axis = cfg.grid_w // 2
    for _ in range(40):
        gx = int(b.rng.integers(1, axis - gw + 1))
        gy = int(b.rng.integers(1, cfg.grid_h - gh))
        left = OBB(gx, gy, gw, gh)
        right = OBB(cfg.grid_w - gx - gw, gy, gw, gh)
        if not b.blocked(left) and not b.blocked(right) and not boxes_overlap(left, right):
            return b.add(GAZEBO, left, 0), b.add(GAZEBO, right, 0)
    return None


def _build_fence_run(b: _Builder) -> None:
    fw, fh = b.catalog[1].default_footprint  # fence segment
    count = int(b.rng.integers(3, 6))
    horizontal = bool(b.rng.random() < 0.5)
    seg_w, seg_h = (fw, fh) if horizontal else (fh, fw)
    run_w = seg_w * count if horizontal else seg_w
    run_h = seg_h if horizontal else seg_h * count
    orientation = 0 if horizontal else 90
    for _ in range(40):
        x = int(b.rng.integers(0, b.config.grid_w - run_w + 1))
        y = int(b.rng.integers(0, b.config.grid_h - run_h + 1))
        if b.blocked(OBB(x, y, run_w, run_h)):
            continue
        for k in range(count):
            ox = x + k * seg_w if horizontal else x
            oy = y if horizontal else y + k * seg_h
            b.add(1, OBB(ox, oy, seg_w, seg_h), orientation)
        return


_DECOR = (0, 2, 3, 4, 5)  # wall, hedge, lamp, well, bench
_FREE_ARCH = (8, 9, 10)  # cabin, greenhouse, gazebo


def _unit_placement(unit: Unit, rule: str) -> HeldOutPlacement:
    return HeldOutPlacement(
        unit_id=unit.unit_id,
        category_id=unit.category_id,
        obb=unit.obb,
        orientation=unit.orientation,
        rule=rule,
        correct_region=(int(unit.obb.x), int(unit.obb.y), int(unit.obb.x2), int(unit.obb.y2)),
    )


def generate_scene(config: GeneratorConfig, seed: int) -> tuple[Scene, HeldOutPlacement]:
    rng = np.random.default_rng(seed)
    b = _Builder(config, rng)

    row_held = _build_row(b) if config.row_rule else None
    pair = _build_gazebo_pair(b) if config.symmetry_rule else None
    sym_held = _unit_placement(pair[int(rng.integers(0, 2))], "symmetry") if pair else None

    if row_held is not None and sym_held is not None:
        held_out = row_held if bool(rng.random() < config.row_fraction) else sym_held
    else:
        held_out = row_held if row_held is not None else sym_held

    if held_out is None:
        n_arch = int(rng.integers(2, 5))
        placed = []
        for _ in range(n_arch):
            cat = int(rng.choice(_FREE_ARCH))
            w, h = b.catalog[cat].default_footprint
            unit = b.try_add(cat, w, h, orientation=int(rng.choice((0, 90, 180, 270))))
            if unit is not None:
                placed.append(unit)
        if not placed:
            raise GenerationError("could not place any architectural unit")
        held_out = _unit_placement(placed[int(rng.integers(0, len(placed)))], "free")

    if config.fence_rule:
        for _ in range(int(rng.integers(1, 3))):
            _build_fence_run(b)

    lo, hi = config.units_range
    n_target = int(rng.integers(lo, hi + 1))
    attempts = 0
    while len(b.units) < n_target and attempts < 200:
        attempts += 1
        cat = int(rng.choice(_DECOR))
        w, h = b.catalog[cat].default_footprint
        if bool(rng.random() < 0.5):
            w, h = h, w
            orientation = 90
        else:
            orientation = 0
        b.try_add(cat, w, h, orientation, tries=10)
    if len(b.units) < lo:
        raise GenerationError(
            f"placed only {len(b.units)} units, below the requested minimum {lo}"
        )

    scene = Scene(config.grid_w, config.grid_h, b.catalog, b.units, b.mask)
    violations = validate_scene(scene)
    if violations:
        raise GenerationError(f"generator produced an invalid scene: {violations[0]}")
    return scene, held_out


# ---------------------------------------------------------------------------
# Dataset directories


@dataclass(frozen=True)
class DatasetEntry:
    index: int
    scene_file: str
    rules_file: str
    seed: int
    split: str


@dataclass
class SynthDataset:
    root: Path
    config: GeneratorConfig
    entries: list[DatasetEntry]

    def indices(self, split: str | None = None) -> list[int]:
        return [e.index for e in self.entries if split is None or e.split == split]

    def load_scene(self, index: int) -> Scene:
        return read_scene(self.root / self.entries[index].scene_file)

    def load_rules(self, index: int) -> HeldOutPlacement:
        doc = json.loads((self.root / self.entries[index].rules_file).read_text(encoding="utf-8"))
        if doc.get("format") != RULES_FORMAT:
            raise ValueError(f"unsupported rules format {doc.get('format')!r}")
        return HeldOutPlacement.from_doc(doc)

    @classmethod
    def load(cls, root: str | Path) -> "SynthDataset":
        root = Path(root)
        doc = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
        if doc.get("format") != MANIFEST_FORMAT:
            raise ValueError(f"unsupported manifest format {doc.get('format')!r}")
        entries = [
            DatasetEntry(
                index=i,
                scene_file=e["scene"],
                rules_file=e["rules"],
                seed=int(e["seed"]),
                split=str(e["split"]),
            )
            for i, e in enumerate(doc["scenes"])
        ]
        return cls(root=root, config=GeneratorConfig.from_doc(doc["config"]), entries=entries)


def generate_dataset(
    config: GeneratorConfig, n: int, seed: int, out_dir: str | Path, train_fraction: float = 0.8
) -> SynthDataset:
    if n < 1:
        raise ValueError(f"dataset size must be >= 1, got {n}")
    root = Path(out_dir)
    (root / "scenes").mkdir(parents=True, exist_ok=True)
    n_train = int(round(n * train_fraction))
    scenes_meta = []
    entries = []
    for i in range(n):
        scene_seed = seed + i
        scene, held_out = generate_scene(config, scene_seed)
        scene_rel = f"scenes/{i:05d}.scene"
        rules_rel = f"scenes/{i:05d}.rules"
        write_scene(scene, root / scene_rel)
        (root / rules_rel).write_text(dumps_canonical(held_out.to_doc()), encoding="utf-8")
        split = "train" if i < n_train else "test"
        scenes_meta.append({"scene": scene_rel, "rules": rules_rel, "seed": scene_seed, "split": split})
        entries.append(DatasetEntry(i, scene_rel, rules_rel, scene_seed, split))
    manifest = {
        "format": MANIFEST_FORMAT,
        "config": config.to_doc(),
        "count": n,
        "seed": seed,
        "scenes": scenes_meta,
    }
    (root / "manifest.json").write_text(dumps_canonical(manifest), encoding="utf-8")
    return SynthDataset(root=root, config=config, entries=entries)
