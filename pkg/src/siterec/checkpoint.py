"""Versioned model checkpoints tied to the unit catalog they were trained on."""

from __future__ import annotations

from pathlib import Path

import torch

from .catalog import Catalog, CatalogError, get_catalog
from .model import LocationNet, ModelConfig

CHECKPOINT_FORMAT = "siterec.checkpoint/1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | Path, model: LocationNet, catalog: Catalog, extra: dict | None = None) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": model.cfg.to_doc(),
        "catalog_name": catalog.name,
        "catalog_hash": catalog.digest(),
        "state": model.state_dict(),
        "extra": dict(extra or {}),
    }
    torch.save(doc, Path(path))


def _read_doc(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    doc = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"not a checkpoint file: {path}")
    return doc


def _restore(doc: dict, catalog: Catalog) -> tuple[LocationNet, dict]:
    if doc["catalog_hash"] != catalog.digest():
        raise CheckpointError(
            f"checkpoint was trained against catalog {doc['catalog_name']} "
            f"({doc['catalog_hash'][:12]}...), which does not match {catalog.name}"
        )
    model = LocationNet(ModelConfig.from_doc(doc["config"]))
    model.load_state_dict(doc["state"])
    model.eval()
    return model, doc.get("extra", {})


def load_checkpoint(path: str | Path, catalog: Catalog) -> tuple[LocationNet, dict]:
    return _restore(_read_doc(path), catalog)


def load_checkpoint_auto(path: str | Path) -> tuple[LocationNet, Catalog, dict]:
    """Load resolving the catalog by the name stored in the checkpoint."""
    doc = _read_doc(path)
    try:
        catalog = get_catalog(str(doc["catalog_name"]))
    except CatalogError as exc:
        raise CheckpointError(f"{exc} (referenced by {path})") from exc
    model, extra = _restore(doc, catalog)
    return model, catalog, extra
