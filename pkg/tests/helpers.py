"""Shared test utilities: seeded random scenes and finite-difference checks."""
from __future__ import annotations

from typing import Callable

import numpy as np

from siterec.catalog import Catalog, UnitKind, desk_catalog
from siterec.scene import OBB, ORIENTATIONS, Scene, Unit, boxes_overlap


def check_gradients(
    named_parameters,
    probe: Callable[[], float],
    rng: np.random.Generator,
    entries_per_param: int = 4,
    steps: tuple[float, ...] = (1e-4, 1e-5, 1e-6),
    rtol: float = 1e-3,
) -> None:
    """Compare .grad against central finite differences of `probe`.

    Retries with smaller steps: a ReLU kink within +-h poisons the estimate
    at that h but vanishes for smaller h, while a genuine gradient bug stays
    O(1) at every step size. Parameters must already hold gradients.
    """
    import torch

    for name, param in named_parameters:
        assert param.grad is not None, f"no gradient reached {name}"
        flat = param.detach().reshape(-1)
        grad = param.grad.reshape(-1)
        idx = rng.choice(flat.numel(), size=min(entries_per_param, flat.numel()), replace=False)
        for i in idx:
            an = grad[i].item()
            orig = flat[i].item()
            best = np.inf
            for h in steps:
                with torch.no_grad():
                    flat[i] = orig + h
                    hi = probe()
                    flat[i] = orig - h
                    lo = probe()
                    flat[i] = orig
                fd = (hi - lo) / (2 * h)
                err = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
                best = min(best, err)
                if best < rtol:
                    break
            assert best < rtol, f"{name}[{i}]: analytic={an} err={best}"


def _fits(obb: OBB, placed: list[OBB], grid_w: int, grid_h: int) -> bool:
    if obb.x < 0 or obb.y < 0 or obb.x2 > grid_w or obb.y2 > grid_h:
        return False
    return not any(boxes_overlap(obb, p) for p in placed)


def random_scene(
    rng: np.random.Generator,
    n_units: int,
    grid_w: int = 64,
    grid_h: int = 64,
    catalog: Catalog | None = None,
    max_extent: int = 9,
    run_prob: float = 0.3,
) -> Scene:
    """Scene of non-overlapping random boxes; sometimes a touching run.

    Runs (identical touching segments of one infrastructure category) are
    included with probability ``run_prob`` so merging paths get exercised.
    """
    cat = catalog if catalog is not None else desk_catalog()
    infra_ids = cat.ids_of_kind(UnitKind.INFRASTRUCTURE)
    arch_ids = cat.ids_of_kind(UnitKind.ARCHITECTURAL)
    placed: list[OBB] = []
    units: list[Unit] = []
    uid = 0

    def try_place(w: int, h: int) -> OBB | None:
        for _ in range(60):
            x = int(rng.integers(0, max(grid_w - w, 0) + 1))
            y = int(rng.integers(0, max(grid_h - h, 0) + 1))
            obb = OBB(x, y, w, h)
            if _fits(obb, placed, grid_w, grid_h):
                return obb
        return None

    budget = 40 * n_units + 40
    while uid < n_units:
        budget -= 1
        if budget <= 0:
            break  # crowded grid; a smaller scene is fine for tests
        if rng.random() < run_prob and n_units - uid >= 2:
            # A run of touching identical segments, horizontal or vertical.
            seg_w = int(rng.integers(1, 4))
            seg_h = int(rng.integers(1, 4))
            count = int(rng.integers(2, min(4, n_units - uid) + 1))
            horizontal = bool(rng.random() < 0.5)
            total_w = seg_w * count if horizontal else seg_w
            total_h = seg_h if horizontal else seg_h * count
            if total_w > grid_w or total_h > grid_h:
                continue
            category = int(rng.choice(infra_ids))
            orientation = int(rng.choice(ORIENTATIONS))
            base = try_place(total_w, total_h)
            if base is None:
                continue
            for k in range(count):
                ox = base.x + k * seg_w if horizontal else base.x
                oy = base.y if horizontal else base.y + k * seg_h
                obb = OBB(ox, oy, seg_w, seg_h)
                placed.append(obb)
                units.append(Unit(uid, category, obb, orientation))
                uid += 1
        else:
            w = int(rng.integers(1, max_extent + 1))
            h = int(rng.integers(1, max_extent + 1))
            category = int(rng.choice(arch_ids if rng.random() < 0.5 else infra_ids))
            orientation = int(rng.choice(ORIENTATIONS))
            obb = try_place(w, h)
            if obb is None:
                continue
            placed.append(obb)
            units.append(Unit(uid, category, obb, orientation))
            uid += 1

    mask = np.zeros((grid_w, grid_h), dtype=bool)
    return Scene(grid_w, grid_h, cat, units, mask)
