"""Region and object category vocabularies.

The node order of every graph and embedding table in the package is
``regions + objects``; a node index below ``n_regions`` is a region category,
the rest are object categories.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

REGION_CATEGORIES = (
    "bathroom", "bedroom", "closet", "dining room", "entryway", "family room",
    "garage", "hallway", "library", "laundry room", "kitchen", "living room",
    "meeting room", "lounge", "office", "porch", "rec room", "stairs",
    "toilet", "utility room", "tv room", "gym", "outdoor", "balcony",
    "bar", "classroom", "dining booth", "spa",
)

OBJECT_CATEGORIES = (
    "chair", "table", "picture", "cabinet", "cushion", "sofa", "bed",
    "chest of drawers", "plant", "sink", "toilet seat", "stool", "towel",
    "tv monitor", "shower", "bathtub", "counter", "fireplace", "gym equipment",
)


@dataclass(frozen=True)
class CategorySpace:
    regions: tuple[str, ...] = REGION_CATEGORIES
    objects: tuple[str, ...] = OBJECT_CATEGORIES

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "objects", tuple(self.objects))
        names = self.regions + self.objects
        if len(set(names)) != len(names):
            raise ValueError("category names must be unique across regions and objects")
        if not self.regions:
            raise ValueError("at least one region category is required")

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def n_objects(self) -> int:
        return len(self.objects)

    @property
    def n_nodes(self) -> int:
        return len(self.regions) + len(self.objects)

    @property
    def node_names(self) -> tuple[str, ...]:
        return self.regions + self.objects

    def region_index(self, name: str) -> int:
        return self.regions.index(name)

    def object_index(self, name: str) -> int:
        return self.objects.index(name)

    def region_node(self, region: int) -> int:
        return region

    def object_node(self, obj: int) -> int:
        return self.n_regions + obj

    def node_index(self, name: str) -> int:
        return self.node_names.index(name)

    def to_dict(self) -> dict:
        return {"regions": list(self.regions), "objects": list(self.objects)}

    @classmethod
    def from_dict(cls, d: dict) -> "CategorySpace":
        return cls(tuple(d["regions"]), tuple(d["objects"]))

    def hash(self) -> str:
        """Short content hash used to chain persisted artifacts together."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


DEFAULT_SPACE = CategorySpace()
