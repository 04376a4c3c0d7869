"""End-to-end recommendation: scene in, location heatmap and decoded edges out."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .catalog import Catalog
from .checkpoint import load_checkpoint, load_checkpoint_auto
from .heatmap import Heatmap, heatmap_from_labels, postprocess
from .metrics import placement_validity
from .model import LocationNet, sample_edges
from .samples import pack_batch, scene_sample
from .scene import Scene, Violation, validate_scene
from .training import compute_clues


class SceneRejected(ValueError):
    """Raised when a scene fails validation or cannot be conditioned on."""

    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(v.message for v in violations) or "invalid scene")
        self.violations = violations


class GraphTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Recommendation:
    heatmap: Heatmap  # normalized
    display: Heatmap
    edges: list[tuple[int, int]]  # (conditioning node id, edge class)
    peak: tuple[int, int]  # grid cell of the heatmap maximum
    forbidden_overlap: float
    collision_overlap: float
    empty: bool  # no edge predicted or every footprint clipped away
    node_count: int
    latency_s: float


class Recommender:
    """Immutable inference engine over one loaded model."""

    def __init__(self, model: LocationNet, catalog: Catalog, variant: str = "full"):
        model.eval()
        self.model = model
        self.catalog = catalog
        self.variant = variant

    @classmethod
    def from_checkpoint(cls, path: str | Path, catalog: Catalog | None = None) -> "Recommender":
        if catalog is None:
            model, catalog, extra = load_checkpoint_auto(path)
        else:
            model, extra = load_checkpoint(path, catalog)
        return cls(model, catalog, variant=str(extra.get("variant", "full")))

    def recommend(
        self,
        scene: Scene,
        mode: str = "argmax",
        seed: int = 0,
        target_size: tuple[int, int] | None = None,
        resolution: int | None = None,
    ) -> Recommendation:
        started = time.monotonic()
        violations = validate_scene(scene)
        if violations:
            raise SceneRejected(violations)
        try:
            sample = scene_sample(scene) if resolution is None else scene_sample(scene, resolution)
        except ValueError as exc:
            raise SceneRejected([Violation("empty_graph", str(exc), ())]) from exc
        if sample.n_nodes + 1 > self.model.cfg.n_max:
            raise GraphTooLarge(
                f"scene yields {sample.n_nodes} nodes; the model handles at most "
                f"{self.model.cfg.n_max - 1}"
            )
        batch = pack_batch([sample], self.model.cfg.n_max)
        clues, _ = compute_clues(self.model, [sample], self.variant)
        with torch.no_grad():
            out = self.model(batch, clues)
        dist = self.model.distribution(out, 0)
        edges, no_edges = sample_edges(dist, mode, seed)
        row = np.zeros(sample.n_nodes, dtype=np.int64)
        for j, cls in edges:
            row[j] = cls
        heatmap, clipped = heatmap_from_labels(
            sample.cond_graph.nodes, row, scene, target_size=target_size
        )
        forbidden, collision = placement_validity(heatmap, scene)
        return Recommendation(
            heatmap=heatmap,
            display=postprocess(heatmap),
            edges=edges,
            peak=heatmap.peak(),
            forbidden_overlap=forbidden,
            collision_overlap=collision,
            empty=no_edges or clipped,
            node_count=sample.n_nodes,
            latency_s=time.monotonic() - started,
        )
