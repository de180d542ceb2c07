"""Episode controller for object-goal navigation and baseline policies.

The ``srg_gcn`` agent repeatedly senses the objects in view, labels them
with regions using the SRG, and heads for the visible region whose
embedding is most similar to the target's. The moment a target instance
comes into view it switches to a shortest-path pursuit. Every rotation and
translation costs one step of the budget; only translations add to the
travelled distance.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bayes import RegionEstimator
from .gcn import EmbeddingTable, ZeroNormError, cosine_similarity
from .graph import SRG
from .trajectories import nearest_instance
from .world import (
    N_HEADINGS, NoPathError, Pose, Scene, direction_heading, distance_field, heading_direction,
    line_of_sight, path_to_nearest, visible_objects,
)

POLICIES = ("srg_gcn", "random", "greedy_unexplored")
ACTIONS = ("forward", "backward", "rotate_left", "rotate_right")
_ACTION_CODES = {"forward": "F", "backward": "B", "rotate_left": "L", "rotate_right": "R"}


class NoDecision(LookupError):
    """No visible region to choose from."""


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 350
    success_radius_m: float = 1.0
    sense_radius_m: float = 10.0
    k: int = 4
    step_translation_m: float = 0.3
    step_rotation_deg: float = 30.0
    # >0 adds similarity to the last chosen region to the walk score
    history_weight: float = 0.0

    def __post_init__(self):
        for name in ("max_steps", "success_radius_m", "sense_radius_m", "step_translation_m", "step_rotation_deg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if abs(360.0 / self.step_rotation_deg - N_HEADINGS) > 1e-9:
            raise ValueError(f"the pose model has {N_HEADINGS} headings; step_rotation_deg must be 30")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Policy:
    kind: str
    srg: SRG | None = None
    embeddings: EmbeddingTable | None = None

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICIES}")
        if self.kind == "srg_gcn" and (self.srg is None or self.embeddings is None):
            raise ValueError("srg_gcn policy needs both an SRG and an embedding table")


@dataclass(frozen=True)
class EpisodeSpec:
    episode_id: str
    scene_id: str
    target: int
    start: Pose
    seed: int

    def to_dict(self) -> dict:
        return {"episode_id": self.episode_id, "scene_id": self.scene_id, "target": self.target,
                "start": [list(self.start.cell), self.start.heading], "seed": self.seed}


@dataclass
class EpisodeRecord:
    episode_id: str
    scene_id: str
    policy: str
    target: int
    start: Pose
    success: bool
    steps: int
    path_m: float
    shortest_m: float
    terminal_geodesic_m: float
    terminal_euclid_m: float
    termination: str
    actions: str = ""
    regions_visited: list = field(default_factory=list)
    decisions: list = field(default_factory=list)

    def to_dict(self, space=None) -> dict:
        d = {
            "episode_id": self.episode_id,
            "scene_id": self.scene_id,
            "policy": self.policy,
            "target": space.objects[self.target] if space else self.target,
            "start": [list(self.start.cell), self.start.heading],
            "success": self.success,
            "steps": self.steps,
            "path_m": self.path_m,
            "shortest_m": self.shortest_m,
            "terminal_geodesic_m": self.terminal_geodesic_m,
            "terminal_euclid_m": self.terminal_euclid_m,
            "termination": self.termination,
            "actions": self.actions,
            "regions_visited": [space.regions[r] for r in self.regions_visited] if space else self.regions_visited,
            "decisions": self.decisions,
        }
        return d


@dataclass(frozen=True)
class RegionChoice:
    region: int
    anchors: tuple
    similarities: dict


def select_next_region(table: EmbeddingTable, visible: dict, target: int, space,
                       previous_region: int | None = None, history_weight: float = 0.0) -> RegionChoice:
    """Visible region category whose embedding is closest to the target's.

    ``visible`` maps object ids to region estimates. Regions whose embedding
    has zero norm score ``-inf``. Ties go to the lower region index.
    """
    if not visible:
        raise NoDecision("no visible regions")
    target_vec = table[space.object_node(target)]
    regions = sorted({est.region for est in visible.values()})
    sims = {}
    for r in regions:
        try:
            s = cosine_similarity(target_vec, table[space.region_node(r)])
            if history_weight and previous_region is not None:
                s += history_weight * cosine_similarity(table[space.region_node(previous_region)],
                                                        table[space.region_node(r)])
        except ZeroNormError:
            s = -math.inf
        sims[r] = s
    best = max(regions, key=lambda r: (sims[r], -r))
    anchors = tuple(sorted(oid for oid, est in visible.items() if est.region == best))
    return RegionChoice(best, anchors, sims)


def random_policy_step(pose: Pose, rng: np.random.Generator) -> str:
    """Uniform draw over the four motion actions."""
    return ACTIONS[int(rng.integers(len(ACTIONS)))]


class _Agent:
    """Pose, budget and bookkeeping shared by all policies."""

    def __init__(self, scene: Scene, spec: EpisodeSpec, config: EpisodeConfig):
        self.scene = scene
        self.config = config
        self.pose = spec.start
        self.steps = 0
        self.translations = 0
        self.actions: list[str] = []
        self.targets = scene.objects_of(spec.target)
        self.target_cells = [o.cell for o in self.targets]
        self.regions_visited = [scene.region_at(self.pose.cell).category]

    @property
    def out_of_budget(self) -> bool:
        return self.steps >= self.config.max_steps

    def euclid_to_goal(self) -> float:
        return min(self.scene.euclidean_m(self.pose.cell, c) for c in self.target_cells)

    def at_goal(self) -> bool:
        return self.euclid_to_goal() <= self.config.success_radius_m + 1e-9

    @property
    def finished(self) -> bool:
        return self.at_goal() or self.out_of_budget

    def act(self, action: str) -> None:
        self.steps += 1
        self.actions.append(_ACTION_CODES[action])
        h = self.pose.heading
        if action == "rotate_left":
            self.pose = Pose(self.pose.cell, h + 1)
        elif action == "rotate_right":
            self.pose = Pose(self.pose.cell, h - 1)
        else:
            dr, dc = heading_direction(h)
            if action == "backward":
                dr, dc = -dr, -dc
            nxt = (self.pose.cell[0] + dr, self.pose.cell[1] + dc)
            if self.scene.is_free(nxt):
                self.pose = Pose(nxt, h)
                self.translations += 1
                cat = self.scene.region_at(nxt).category
                if cat != self.regions_visited[-1]:
                    self.regions_visited.append(cat)

    def face(self, heading: int) -> None:
        while self.pose.heading != heading % N_HEADINGS and not self.finished:
            diff = (heading - self.pose.heading) % N_HEADINGS
            self.act("rotate_left" if diff <= N_HEADINGS // 2 else "rotate_right")

    def follow(self, path, interrupt=None) -> str:
        """Walk ``path`` (starting at the current cell).

        Returns ``"goal"``, ``"budget"``, ``"interrupted"`` or ``"arrived"``.
        """
        for cell in path[1:]:
            if self.at_goal():
                return "goal"
            step = (cell[0] - self.pose.cell[0], cell[1] - self.pose.cell[1])
            self.face(direction_heading(step))
            if self.finished:
                break
            self.act("forward")
            if self.finished:
                break
            if interrupt is not None and interrupt():
                return "interrupted"
        if self.at_goal():
            return "goal"
        if self.out_of_budget:
            return "budget"
        return "arrived"

    def visible_targets(self) -> list:
        r = self.config.sense_radius_m
        return [o for o in self.targets
                if self.scene.euclidean_m(self.pose.cell, o.cell) <= r
                and line_of_sight(self.scene, self.pose.cell, o.cell)]

    def pursue(self) -> str:
        seen = self.visible_targets()
        path, _ = path_to_nearest(self.scene, self.pose.cell, [o.cell for o in seen])
        return self.follow(path)


def _run_random(agent: _Agent, spec: EpisodeSpec) -> str:
    rng = np.random.default_rng(spec.seed)
    while not agent.finished:
        agent.act(random_policy_step(agent.pose, rng))
    return "success" if agent.at_goal() else "budget"


def _run_greedy(agent: _Agent) -> str:
    visited = {agent.pose.cell}
    while not agent.finished:
        if agent.visible_targets():
            agent.pursue()
            continue
        frontier = set(agent.scene.free_cells()) - visited
        if not frontier:
            return "exhausted"
        try:
            path, _ = path_to_nearest(agent.scene, agent.pose.cell, frontier)
        except NoPathError:
            return "exhausted"

        def stand(path=path):
            visited.add(agent.pose.cell)
            return bool(agent.visible_targets())

        agent.follow(path, interrupt=stand)
        visited.add(agent.pose.cell)
    return "success" if agent.at_goal() else "budget"


def _run_srg_gcn(agent: _Agent, policy: Policy, estimator: RegionEstimator, decisions: list) -> str:
    scene, cfg, space = agent.scene, agent.config, agent.scene.space
    visited = {scene.region_at(agent.pose.cell).id}
    previous_region = None
    while not agent.finished:
        if agent.visible_targets():
            agent.pursue()
            continue
        visible = visible_objects(scene, agent.pose, cfg.sense_radius_m)
        estimates = estimator.visible_regions(visible, cfg.k)
        usable = {oid: est for oid, est in estimates.items()
                  if scene.region_at(est.obj.cell).id not in visited}
        entry = {
            "step": agent.steps,
            "pose": [list(agent.pose.cell), agent.pose.heading],
            "visible_objects": [[o.id, space.objects[o.category]] for o in visible],
            "region_estimates": [est.trace(space) for est in estimates.values()],
        }
        if usable:
            choice = select_next_region(policy.embeddings, usable, agent.targets[0].category, space,
                                        previous_region, cfg.history_weight)
            anchors = [est.obj.cell for oid, est in usable.items() if oid in choice.anchors]
            path, _ = path_to_nearest(scene, agent.pose.cell, anchors)
            dest = scene.region_at(path[-1]).id
            previous_region = choice.region
            entry.update(kind="region", chosen_region=space.regions[choice.region],
                         similarities={space.regions[r]: s for r, s in choice.similarities.items()},
                         anchor_cell=list(path[-1]), destination_instance=dest)
        else:
            remaining = [r for r in scene.regions if r.id not in visited]
            if not remaining:
                entry.update(kind="exhausted")
                decisions.append(entry)
                return "exhausted"
            dist = distance_field(scene, agent.pose.cell)
            reachable = [r for r in remaining if dist[r.centroid_cell()] >= 0]
            if not reachable:
                entry.update(kind="exhausted")
                decisions.append(entry)
                return "exhausted"
            nearest = min(reachable, key=lambda r: (dist[r.centroid_cell()], r.id))
            path, _ = path_to_nearest(scene, agent.pose.cell, [nearest.centroid_cell()])
            dest = nearest.id
            entry.update(kind="explore", destination_instance=dest, anchor_cell=list(path[-1]))
        decisions.append(entry)
        visited.add(dest)
        agent.follow(path, interrupt=lambda: bool(agent.visible_targets()))
    return "success" if agent.at_goal() else "budget"


def run_episode(scene: Scene, policy: Policy, spec: EpisodeSpec, config: EpisodeConfig = EpisodeConfig(),
                estimator: RegionEstimator | None = None) -> EpisodeRecord:
    if spec.scene_id != scene.id:
        raise ValueError(f"episode {spec.episode_id} is for {spec.scene_id}, not {scene.id}")
    _, shortest = nearest_instance(scene, spec.start.cell, spec.target)
    agent = _Agent(scene, spec, config)
    decisions: list = []
    try:
        if agent.at_goal():
            termination = "success"
        elif policy.kind == "random":
            termination = _run_random(agent, spec)
        elif policy.kind == "greedy_unexplored":
            termination = _run_greedy(agent)
        else:
            if estimator is None:
                estimator = RegionEstimator(policy.srg)
            termination = _run_srg_gcn(agent, policy, estimator, decisions)
    except NoPathError:
        termination = "planner_failure"
    success = agent.at_goal()
    if success:
        termination = "success"
    _, terminal_geo = nearest_instance(scene, agent.pose.cell, spec.target)
    return EpisodeRecord(
        spec.episode_id, scene.id, policy.kind, spec.target, spec.start, success, agent.steps,
        agent.translations * config.step_translation_m, shortest, terminal_geo, agent.euclid_to_goal(),
        termination, "".join(agent.actions), agent.regions_visited, decisions)


def _geodesic_to_any(scene: Scene, cells) -> np.ndarray:
    best = None
    for c in cells:
        d = distance_field(scene, c).astype(float)
        d[d < 0] = np.inf
        best = d if best is None else np.minimum(best, d)
    return best * scene.cell_size


def sample_episodes(scene: Scene, n: int, seed, config: EpisodeConfig = EpisodeConfig(),
                    min_start_geodesic_m: float = 6.0) -> list[EpisodeSpec]:
    """Draw ``n`` episode specifications for ``scene``.

    Start cells are farther than the success radius from every target
    instance, lie in a room holding no target instance, and are at least
    ``min_start_geodesic_m`` from the nearest one. The last two conditions
    are relaxed in that order when no cell satisfies them.
    """
    rng = np.random.default_rng(seed)
    present = sorted({o.category for o in scene.objects})
    if not present:
        raise ValueError(f"{scene.id} has no objects to search for")
    cells = scene.free_cells()
    geo = {t: _geodesic_to_any(scene, [o.cell for o in scene.objects_of(t)]) for t in present}
    specs = []
    for i in range(n):
        for _ in range(100):
            target = present[int(rng.integers(len(present)))]
            tcells = [o.cell for o in scene.objects_of(target)]
            holding = {scene.region_at(c).id for c in tcells}
            far = [c for c in cells if np.isfinite(geo[target][c])
                   and min(scene.euclidean_m(c, t) for t in tcells) > config.success_radius_m]
            outside = [c for c in far if scene.region_at(c).id not in holding]
            starts = [c for c in outside if geo[target][c] >= min_start_geodesic_m] or outside or far
            if starts:
                break
        else:
            raise ValueError(f"cannot place a start in {scene.id}")
        cell = starts[int(rng.integers(len(starts)))]
        heading = int(rng.integers(N_HEADINGS))
        specs.append(EpisodeSpec(f"{scene.id}/{i:04d}", scene.id, target, Pose(cell, heading),
                                 int(rng.integers(2 ** 31))))
    return specs


def specs_hash(specs) -> str:
    blob = json.dumps([s.to_dict() for s in specs], sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
