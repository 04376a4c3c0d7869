"""Top-down orthographic depth rendering.

Channel 0 holds unit heights normalized by the catalog's tallest entry
(taller = brighter); channel 1 is the binary forbidden mask.  The grid
maps into the square image with a single uniform scale, letterboxed and
centered when the grid is not square, and pixels sample the grid with
nearest-neighbor lookups at pixel centers.  Row 0 of the image is the
top of the site (high y), matching the usual image convention.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scene import OBB, Scene, footprint_cells

MIN_RESOLUTION = 32
DESK_RESOLUTION = 128
FULLSCALE_RESOLUTION = 512


@dataclass(frozen=True)
class SiteImage:
    data: np.ndarray  # (2, R, R) float32
    grid_w: int
    grid_h: int
    scale: float  # pixels per grid unit
    off_x: float  # letterbox offsets in pixels
    off_y: float

    @property
    def resolution(self) -> int:
        return self.data.shape[1]

    @property
    def depth(self) -> np.ndarray:
        return self.data[0]

    @property
    def forbidden(self) -> np.ndarray:
        return self.data[1]

    def grid_to_pixel(self, gx: float, gy: float) -> tuple[float, float]:
        """Grid point -> pixel coordinates (x right, y down)."""
        return (
            self.off_x + gx * self.scale,
            self.off_y + (self.grid_h - gy) * self.scale,
        )

    def pixel_to_grid(self, px: float, py: float) -> tuple[float, float]:
        return (
            (px - self.off_x) / self.scale,
            self.grid_h - (py - self.off_y) / self.scale,
        )

    def obb_pixel_box(self, obb: OBB) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1) in pixel coordinates, y0 < y1."""
        x0, y1 = self.grid_to_pixel(obb.x, obb.y)
        x1, y0 = self.grid_to_pixel(obb.x2, obb.y2)
        return (x0, y0, x1, y1)


def render_topdown(scene: Scene, resolution: int = DESK_RESOLUTION) -> SiteImage:
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    gw, gh = scene.grid_w, scene.grid_h
    scale = resolution / max(gw, gh)
    off_x = (resolution - gw * scale) / 2.0
    off_y = (resolution - gh * scale) / 2.0

    height = np.zeros((gw, gh), dtype=np.float32)
    max_h = scene.catalog.max_height
    for unit in scene.units:
        value = scene.catalog[unit.category_id].nominal_height / max_h
        xs, ys = footprint_cells(unit.obb)
        height[xs, ys] = value

    px = np.arange(resolution, dtype=np.float64) + 0.5
    gx = np.floor((px - off_x) / scale).astype(np.int64)
    gy = np.floor(gh - (px - off_y) / scale).astype(np.int64)
    valid_x = (gx >= 0) & (gx < gw)
    valid_y = (gy >= 0) & (gy < gh)
    cx = np.clip(gx, 0, gw - 1)
    cy = np.clip(gy, 0, gh - 1)

    # data[c, row, col]: row follows gy (flipped), col follows gx.
    valid = valid_y[:, None] & valid_x[None, :]
    depth = np.where(valid, height[cx[None, :], cy[:, None]], 0.0)
    forbidden = np.where(valid, scene.forbidden_mask[cx[None, :], cy[:, None]], False)

    data = np.stack([depth, forbidden.astype(np.float32)]).astype(np.float32)
    return SiteImage(data=data, grid_w=gw, grid_h=gh, scale=scale, off_x=off_x, off_y=off_y)


def save_image(image: SiteImage, path: str | Path) -> None:
    np.savez_compressed(
        Path(path),
        data=image.data,
        meta=np.asarray([image.grid_w, image.grid_h, image.scale, image.off_x, image.off_y]),
    )


def load_image(path: str | Path) -> SiteImage:
    with np.load(Path(path)) as archive:
        data = archive["data"].astype(np.float32)
        gw, gh, scale, off_x, off_y = archive["meta"].tolist()
    return SiteImage(
        data=data, grid_w=int(gw), grid_h=int(gh), scale=scale, off_x=off_x, off_y=off_y
    )


def export_png(image: SiteImage, path: str | Path) -> None:
    """8-bit grayscale snapshot for human inspection only."""
    from PIL import Image

    gray = np.clip(image.depth * 200.0 + image.forbidden * 55.0, 0.0, 255.0)
    Image.fromarray(gray.astype(np.uint8), mode="L").save(Path(path))
