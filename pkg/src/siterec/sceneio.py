"""Scene document serialization.

The on-disk format is canonical JSON (sorted keys, compact separators,
one trailing newline) so that identical scenes always produce identical
bytes; see docs/scene_format.md for the field-by-field schema.  The
forbidden mask is stored as run-length-encoded rows: entry y holds the
runs of row y as [value, count] pairs along x.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .catalog import Catalog, get_catalog
from .scene import OBB, ORIENTATIONS, Scene, Unit

SCENE_FORMAT = "siterec.scene/1"


class SceneFormatError(ValueError):
    pass


def encode_mask_rows(mask: np.ndarray) -> list[list[list[int]]]:
    """RLE rows for a (grid_w, grid_h) boolean mask, one entry per y row."""
    grid_w, grid_h = mask.shape
    rows = []
    for y in range(grid_h):
        row = mask[:, y]
        runs: list[list[int]] = []
        start = 0
        for x in range(1, grid_w + 1):
            if x == grid_w or row[x] != row[start]:
                runs.append([int(row[start]), x - start])
                start = x
        rows.append(runs)
    return rows


def decode_mask_rows(rows: list, grid_w: int, grid_h: int) -> np.ndarray:
    if len(rows) != grid_h:
        raise SceneFormatError(f"expected {grid_h} mask rows, got {len(rows)}")
    mask = np.zeros((grid_w, grid_h), dtype=bool)
    for y, runs in enumerate(rows):
        x = 0
        for value, count in runs:
            if value not in (0, 1) or count <= 0:
                raise SceneFormatError(f"bad run [{value}, {count}] in mask row {y}")
            if x + count > grid_w:
                raise SceneFormatError(f"mask row {y} overflows grid width {grid_w}")
            if value:
                mask[x : x + count, y] = True
            x += count
        if x != grid_w:
            raise SceneFormatError(f"mask row {y} covers {x} cells, expected {grid_w}")
    return mask


def scene_to_doc(scene: Scene) -> dict:
    return {
        "format": SCENE_FORMAT,
        "grid_w": scene.grid_w,
        "grid_h": scene.grid_h,
        "catalog": scene.catalog.name,
        "units": [
            {
                "id": u.unit_id,
                "category": u.category_id,
                "x": int(u.obb.x),
                "y": int(u.obb.y),
                "w": int(u.obb.w),
                "h": int(u.obb.h),
                "orientation": u.orientation,
            }
            for u in sorted(scene.units, key=lambda u: u.unit_id)
        ],
        "forbidden_rows": encode_mask_rows(scene.forbidden_mask),
    }


def scene_from_doc(doc: dict, catalog: Catalog | None = None) -> Scene:
    if doc.get("format") != SCENE_FORMAT:
        raise SceneFormatError(f"unsupported scene format {doc.get('format')!r}")
    try:
        grid_w = int(doc["grid_w"])
        grid_h = int(doc["grid_h"])
        cat = catalog if catalog is not None else get_catalog(str(doc["catalog"]))
        units = []
        for d in doc["units"]:
            orientation = int(d.get("orientation", 0))
            if orientation not in ORIENTATIONS:
                raise SceneFormatError(f"unit {d.get('id')}: bad orientation {orientation}")
            units.append(
                Unit(
                    unit_id=int(d["id"]),
                    category_id=int(d["category"]),
                    obb=OBB(int(d["x"]), int(d["y"]), int(d["w"]), int(d["h"])),
                    orientation=orientation,
                )
            )
        mask = decode_mask_rows(doc["forbidden_rows"], grid_w, grid_h)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SceneFormatError):
            raise
        raise SceneFormatError(f"malformed scene document: {exc}") from exc
    return Scene(grid_w, grid_h, cat, units, mask)


def dumps_canonical(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def write_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(dumps_canonical(scene_to_doc(scene)), encoding="utf-8")


def read_scene(path: str | Path, catalog: Catalog | None = None) -> Scene:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{p}: not valid JSON: {exc}") from exc
    return scene_from_doc(doc, catalog)
