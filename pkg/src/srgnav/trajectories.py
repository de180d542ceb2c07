"""Valid trajectories and the training pairs derived from them.

A valid trajectory is the region-category sequence along the geodesic
shortest path from a start cell to the nearest instance of a target object
category. Pairs are expressed as node indices in the category space
(regions first, then objects).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .categories import CategorySpace, DEFAULT_SPACE
from .world import NoPathError, Pose, Scene, distance_field, geodesic_path, region_sequence_of_path

POSITIVE = 1
NEGATIVE = 0
CORPUS_FORMAT_VERSION = 1


class MissingTargetError(ValueError):
    """The scene has no instance of the requested object category."""


@dataclass(frozen=True)
class Trajectory:
    scene_id: str
    target: int
    regions: tuple
    length_m: float

    @property
    def start_region(self) -> int:
        return self.regions[0]


@dataclass(frozen=True)
class TrainingPair:
    anchor: int
    other: int
    label: int


def nearest_instance(scene: Scene, start, target: int):
    """Nearest instance of ``target`` by geodesic distance (ties by id)."""
    cell = start.cell if isinstance(start, Pose) else tuple(start)
    instances = scene.objects_of(target)
    if not instances:
        raise MissingTargetError(f"{scene.id} has no {scene.space.objects[target]!r}")
    dist = distance_field(scene, cell)
    reachable = [(int(dist[o.cell]), o.id, o) for o in instances if dist[o.cell] >= 0]
    if not reachable:
        raise NoPathError(f"no {scene.space.objects[target]!r} reachable from {cell} in {scene.id}")
    steps, _, obj = min(reachable, key=lambda t: (t[0], t[1]))
    return obj, steps * scene.cell_size


def generate_valid_trajectory(scene: Scene, start, target: int) -> Trajectory:
    cell = start.cell if isinstance(start, Pose) else tuple(start)
    obj, _ = nearest_instance(scene, cell, target)
    path, length = geodesic_path(scene, cell, obj.cell)
    return Trajectory(scene.id, target, tuple(region_sequence_of_path(scene, path)), length)


def make_positive_pairs(traj: Trajectory, space: CategorySpace = DEFAULT_SPACE) -> list[TrainingPair]:
    """Prefix-path positives plus (last region, target).

    Every interior region is paired with the final region and with each
    region before it. Pairs of a category with itself carry no signal and
    are skipped.
    """
    seq = traj.regions
    n = len(seq)
    pairs = []
    for x in range(1, n - 1):
        others = [seq[n - 1]] + [seq[j] for j in range(x)]
        for other in others:
            if other != seq[x]:
                pairs.append(TrainingPair(seq[x], other, POSITIVE))
    pairs.append(TrainingPair(seq[-1], space.object_node(traj.target), POSITIVE))
    return pairs


def make_negative_pairs(traj: Trajectory, space: CategorySpace = DEFAULT_SPACE,
                        regions=None) -> list[TrainingPair]:
    """(substitute region, target) negatives for every prefix path.

    The prefix paths are ``regions[:m]`` for ``m >= 3``, i.e. the prefixes
    that have an intermediate node. Substituting any intermediate node by a
    region absent from the trajectory yields the same (substitute, target)
    pair, so each prefix path contributes one negative per absent region.
    ``regions`` restricts the substitution pool (defaults to all region
    categories of ``space``).
    """
    pool = range(space.n_regions) if regions is None else regions
    valid = set(traj.regions)
    invalid = sorted(r for r in pool if r not in valid)
    target = space.object_node(traj.target)
    n_prefix = max(0, len(traj.regions) - 2)
    return [TrainingPair(x, target, NEGATIVE) for _ in range(n_prefix) for x in invalid]


def corpus_pairs(corpus, space: CategorySpace = DEFAULT_SPACE, regions=None) -> list[TrainingPair]:
    pairs = []
    for traj in corpus:
        pairs.extend(make_positive_pairs(traj, space))
        pairs.extend(make_negative_pairs(traj, space, regions))
    return pairs


def generate_corpus(scenes) -> list[Trajectory]:
    """One trajectory per (scene, start room, object category present).

    Start cells are room centroids, so the corpus size is
    ``sum(#rooms * #categories present)`` over the scenes.
    """
    corpus = []
    for scene in scenes:
        targets = sorted({o.category for o in scene.objects})
        for region in scene.regions:
            start = region.centroid_cell()
            for t in targets:
                corpus.append(generate_valid_trajectory(scene, start, t))
    return corpus


def dumps_corpus(corpus, space: CategorySpace = DEFAULT_SPACE) -> str:
    """JSON lines: a header record, then one trajectory per line."""
    lines = [json.dumps({"format_version": CORPUS_FORMAT_VERSION, "category_space_hash": space.hash()})]
    for t in corpus:
        lines.append(json.dumps({
            "scene_id": t.scene_id,
            "target": space.objects[t.target],
            "region_sequence": [space.regions[r] for r in t.regions],
            "length_m": t.length_m,
        }))
    return "".join(line + "\n" for line in lines)


def loads_corpus(text: str, space: CategorySpace = DEFAULT_SPACE) -> list[Trajectory]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("corpus file is empty")
    header = json.loads(lines[0])
    if header.get("format_version") != CORPUS_FORMAT_VERSION:
        raise ValueError(f"unsupported corpus format_version {header.get('format_version')!r}")
    if header.get("category_space_hash") != space.hash():
        raise ValueError("corpus was written for a different category space")
    out = []
    for line in lines[1:]:
        d = json.loads(line)
        out.append(Trajectory(d["scene_id"], space.object_index(d["target"]),
                              tuple(space.region_index(r) for r in d["region_sequence"]),
                              float(d["length_m"])))
    return out
