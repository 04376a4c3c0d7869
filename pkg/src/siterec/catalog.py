"""Unit catalogs: the vocabulary of placeable building units.

A catalog assigns every unit category a dense integer id, a kind
(infrastructure units merge in the relation graph, architectural units do
not, and the single forbidden kind is rendered as a mask rather than
placed), a nominal height used by the depth render, and a default
footprint in grid units.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum


class UnitKind(str, Enum):
    INFRASTRUCTURE = "infrastructure"
    ARCHITECTURAL = "architectural"
    FORBIDDEN = "forbidden"


@dataclass(frozen=True)
class UnitCatalogEntry:
    category_id: int
    name: str
    kind: UnitKind
    nominal_height: float
    default_footprint: tuple[int, int]  # (width, height) in grid units


class CatalogError(ValueError):
    pass


class Catalog:
    """Immutable list of catalog entries with dense, unique category ids."""

    def __init__(self, name: str, entries: list[UnitCatalogEntry]):
        ids = [e.category_id for e in entries]
        if sorted(ids) != list(range(len(entries))):
            raise CatalogError(f"category ids must be dense and unique, got {sorted(ids)}")
        forbidden = [e for e in entries if e.kind == UnitKind.FORBIDDEN]
        if len(forbidden) != 1:
            raise CatalogError(f"catalog needs exactly one forbidden entry, got {len(forbidden)}")
        self.name = name
        self.entries = sorted(entries, key=lambda e: e.category_id)
        self._by_id = {e.category_id: e for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, category_id: int) -> UnitCatalogEntry:
        try:
            return self._by_id[category_id]
        except KeyError:
            raise CatalogError(f"unknown category id {category_id}") from None

    @property
    def forbidden_id(self) -> int:
        return next(e.category_id for e in self.entries if e.kind == UnitKind.FORBIDDEN)

    def ids_of_kind(self, kind: UnitKind) -> list[int]:
        return [e.category_id for e in self.entries if e.kind == kind]

    @property
    def max_height(self) -> float:
        """Largest nominal height among placeable (non-forbidden) entries."""
        return max(e.nominal_height for e in self.entries if e.kind != UnitKind.FORBIDDEN)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "entries": [
                {
                    "category_id": e.category_id,
                    "name": e.name,
                    "kind": e.kind.value,
                    "nominal_height": e.nominal_height,
                    "default_footprint": list(e.default_footprint),
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Catalog":
        entries = [
            UnitCatalogEntry(
                category_id=int(d["category_id"]),
                name=str(d["name"]),
                kind=UnitKind(d["kind"]),
                nominal_height=float(d["nominal_height"]),
                default_footprint=(int(d["default_footprint"][0]), int(d["default_footprint"][1])),
            )
            for d in doc["entries"]
        ]
        return cls(str(doc["name"]), entries)

    def digest(self) -> str:
        """Stable content hash, used to guard checkpoint/catalog pairing."""
        payload = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def desk_catalog() -> Catalog:
    """Small 12-category catalog for desk-scale experiments."""
    e = UnitCatalogEntry
    k = UnitKind
    return Catalog(
        "desk12",
        [
            e(0, "wall", k.INFRASTRUCTURE, 3.0, (2, 1)),
            e(1, "fence", k.INFRASTRUCTURE, 1.0, (3, 1)),
            e(2, "hedge", k.INFRASTRUCTURE, 1.5, (2, 2)),
            e(3, "lamp", k.INFRASTRUCTURE, 4.0, (1, 1)),
            e(4, "well", k.INFRASTRUCTURE, 2.0, (2, 2)),
            e(5, "bench", k.INFRASTRUCTURE, 1.0, (2, 1)),
            e(6, "house", k.ARCHITECTURAL, 8.0, (8, 6)),
            e(7, "villa", k.ARCHITECTURAL, 10.0, (10, 8)),
            e(8, "cabin", k.ARCHITECTURAL, 5.0, (5, 4)),
            e(9, "greenhouse", k.ARCHITECTURAL, 4.0, (6, 4)),
            e(10, "gazebo", k.ARCHITECTURAL, 6.0, (4, 4)),
            e(11, "pool", k.FORBIDDEN, 0.0, (10, 8)),
        ],
    )


def fullscale_catalog() -> Catalog:
    """Full-size 382-category catalog (280 infrastructure, 101 architectural,
    1 forbidden) with procedurally assigned footprints and heights."""
    entries: list[UnitCatalogEntry] = []
    cid = 0
    for i in range(280):
        w = 1 + (i % 6)
        h = 1 + (i // 6) % 3
        entries.append(
            UnitCatalogEntry(cid, f"infra_{i:03d}", UnitKind.INFRASTRUCTURE, 1.0 + (i % 8), (w, h))
        )
        cid += 1
    for i in range(101):
        w = 4 + (i % 12)
        h = 4 + (i // 12) % 9
        entries.append(
            UnitCatalogEntry(cid, f"arch_{i:03d}", UnitKind.ARCHITECTURAL, 4.0 + (i % 12), (w, h))
        )
        cid += 1
    entries.append(UnitCatalogEntry(cid, "pool", UnitKind.FORBIDDEN, 0.0, (24, 24)))
    return Catalog("fullscale382", entries)


_REGISTRY = {
    "desk12": desk_catalog,
    "fullscale382": fullscale_catalog,
}


def get_catalog(name: str) -> Catalog:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise CatalogError(f"unknown catalog {name!r}; known: {sorted(_REGISTRY)}") from None
