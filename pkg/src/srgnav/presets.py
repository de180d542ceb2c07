"""Ready-made generator configurations.

``house_config`` draws ten rooms from seven common categories of the default
47-node space and places every object category mostly in one dominant room
type. ``tiny_config`` is a small space for fast end-to-end runs.
"""
from __future__ import annotations

import numpy as np

from .categories import CategorySpace, DEFAULT_SPACE
from .world import SceneGenConfig

HOUSE_REGION_WEIGHTS = {
    "bathroom": 2.0, "bedroom": 3.0, "kitchen": 1.0, "living room": 1.0,
    "dining room": 1.0, "hallway": 2.0, "gym": 0.5,
}

# every room type owns at least two object categories so that objects seen
# together tend to vote for the same room
HOUSE_DOMINANT_REGION = {
    "toilet seat": "bathroom", "towel": "bathroom", "shower": "bathroom", "bathtub": "bathroom",
    "bed": "bedroom", "chest of drawers": "bedroom",
    "sink": "kitchen", "counter": "kitchen", "cabinet": "kitchen",
    "sofa": "living room", "cushion": "living room", "fireplace": "living room", "tv monitor": "living room",
    "table": "dining room", "chair": "dining room",
    "picture": "hallway", "plant": "hallway",
    "stool": "gym", "gym equipment": "gym",
}

TINY_SPACE = CategorySpace(
    ("bedroom", "bathroom", "kitchen", "hallway"),
    ("bed", "chest of drawers", "toilet seat", "towel", "sink", "counter", "plant", "picture"),
)

TINY_DOMINANT_REGION = {
    "bed": "bedroom", "chest of drawers": "bedroom", "toilet seat": "bathroom", "towel": "bathroom",
    "sink": "kitchen", "counter": "kitchen", "plant": "hallway", "picture": "hallway",
}


def peaked_placement(space: CategorySpace, dominant: dict, p_dominant: float = 0.85,
                     p_other: float = 0.02) -> np.ndarray:
    """Placement matrix with one dominant region per object category."""
    placement = np.full((space.n_objects, space.n_regions), p_other)
    for obj, region in dominant.items():
        placement[space.object_index(obj), space.region_index(region)] = p_dominant
    return placement


def region_prior(space: CategorySpace, weights: dict) -> np.ndarray:
    prior = np.zeros(space.n_regions)
    for name, w in weights.items():
        prior[space.region_index(name)] = w
    return prior


def house_config(n_regions: int = 10, rows: int = 30, cols: int = 40, p_dominant: float = 0.85,
                 p_other: float = 0.02, copies: int = 5, seed: int = 0) -> SceneGenConfig:
    """Ten furnished rooms on a 9 m x 12 m floor.

    Each room tries ``copies`` placements per object category, so an
    off-type object shows up in a room with probability
    ``1 - (1 - p_other) ** copies`` (about 0.1 by default).
    """
    space = DEFAULT_SPACE
    return SceneGenConfig(
        n_regions=n_regions, rows=rows, cols=cols, space=space, copies=copies, wall_margin=1,
        region_prior=region_prior(space, HOUSE_REGION_WEIGHTS),
        placement=peaked_placement(space, HOUSE_DOMINANT_REGION, p_dominant, p_other),
        seed=seed,
    )


def tiny_config(seed: int = 0) -> SceneGenConfig:
    space = TINY_SPACE
    return SceneGenConfig(
        n_regions=5, rows=16, cols=20, space=space,
        region_prior=region_prior(space, {"bedroom": 2.0, "bathroom": 1.5, "kitchen": 1.0, "hallway": 1.5}),
        placement=peaked_placement(space, TINY_DOMINANT_REGION, 0.85, 0.02),
        seed=seed,
    )
