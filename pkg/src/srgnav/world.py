"""Grid-world indoor scenes: procedural generation and geometric queries.

A scene is an occupancy grid where every free cell carries the id of the
region instance it belongs to. Rooms are laid out by binary space
partitioning, separated by one-cell walls, and joined through single-cell
doorways that are opened along a random spanning tree of the room
adjacency (plus a few extra loops).
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .categories import CategorySpace, DEFAULT_SPACE

BLOCKED = -1
N_HEADINGS = 12
SCENE_FORMAT_VERSION = 1

# 4-neighbourhood in (row, col) lexicographic order; BFS expands in this
# order so shortest paths are reproducible.
NEIGHBOURS = ((-1, 0), (0, -1), (0, 1), (1, 0))

_CELL_CHARS = "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


class SceneGenerationError(RuntimeError):
    """Raised when no valid layout is found within the retry budget."""


class NoPathError(ValueError):
    """Raised when two cells are not connected by free space."""


@dataclass(frozen=True)
class RegionInstance:
    id: int
    category: int
    cells: frozenset
    doorways: frozenset

    def centroid_cell(self) -> tuple[int, int]:
        """Member cell closest to the centroid (ties by row, col)."""
        cells = sorted(self.cells)
        arr = np.array(cells, dtype=float)
        mean = arr.mean(axis=0)
        d = ((arr - mean) ** 2).sum(axis=1)
        return cells[int(np.argmin(d))]


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    category: int
    cell: tuple[int, int]


@dataclass(frozen=True)
class Pose:
    cell: tuple[int, int]
    heading: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cell", (int(self.cell[0]), int(self.cell[1])))
        object.__setattr__(self, "heading", int(self.heading) % N_HEADINGS)


def heading_direction(heading: int) -> tuple[int, int]:
    """Grid step for a translation along ``heading``.

    Headings are 30 degree increments counter-clockwise from east; the step
    goes to the cardinal direction nearest the heading.
    """
    quadrant = int(round((heading % N_HEADINGS) / 3.0)) % 4
    return ((0, 1), (-1, 0), (0, -1), (1, 0))[quadrant]


def direction_heading(step: tuple[int, int]) -> int:
    return {(0, 1): 0, (-1, 0): 3, (0, -1): 6, (1, 0): 9}[step]


@dataclass
class SceneGenConfig:
    """Knobs for :func:`generate_scene`.

    ``placement[o, r]`` is the probability that one instance of object
    category ``o`` is placed in a room of category ``r`` (tried ``copies``
    times per room). ``region_prior`` weights the category draw of each room.
    """

    n_regions: int = 8
    rows: int = 24
    cols: int = 32
    region_prior: np.ndarray | None = None
    placement: np.ndarray | None = None
    space: CategorySpace = DEFAULT_SPACE
    copies: int = 1
    # objects keep this many cells (Chebyshev) away from walls when possible
    wall_margin: int = 0
    min_room: int = 3
    extra_door_prob: float = 0.25
    cell_size: float = 0.3
    seed: int = 0
    max_retries: int = 50

    def __post_init__(self):
        nr, no = self.space.n_regions, self.space.n_objects
        if self.region_prior is None:
            self.region_prior = np.ones(nr)
        if self.placement is None:
            self.placement = np.full((no, nr), 0.5)
        self.region_prior = np.asarray(self.region_prior, dtype=float)
        self.placement = np.asarray(self.placement, dtype=float)
        if self.region_prior.shape != (nr,):
            raise ValueError(f"region_prior must have shape ({nr},)")
        if self.placement.shape != (no, nr):
            raise ValueError(f"placement must have shape ({no}, {nr})")
        if np.any(self.region_prior < 0) or self.region_prior.sum() <= 0:
            raise ValueError("region_prior must be non-negative with positive mass")
        if np.any(self.placement < 0) or np.any(self.placement > 1):
            raise ValueError("placement probabilities must lie in [0, 1]")
        reachable = (self.placement * (self.region_prior > 0)).max(axis=1)
        if no and np.any(reachable <= 0):
            missing = [self.space.objects[i] for i in np.flatnonzero(reachable <= 0)]
            raise ValueError(f"object categories can never be placed: {missing}")
        if self.n_regions < 1 or self.n_regions > len(_CELL_CHARS):
            raise ValueError(f"n_regions must be in [1, {len(_CELL_CHARS)}]")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    def to_dict(self) -> dict:
        return {
            "n_regions": self.n_regions,
            "rows": self.rows,
            "cols": self.cols,
            "region_prior": self.region_prior.tolist(),
            "placement": self.placement.tolist(),
            "space": self.space.to_dict(),
            "copies": self.copies,
            "wall_margin": self.wall_margin,
            "min_room": self.min_room,
            "extra_door_prob": self.extra_door_prob,
            "cell_size": self.cell_size,
            "seed": self.seed,
            "max_retries": self.max_retries,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneGenConfig":
        d = dict(d)
        if "space" in d:
            d["space"] = CategorySpace.from_dict(d["space"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Scene:
    id: str
    grid: np.ndarray
    regions: tuple
    objects: tuple
    cell_size: float = 0.3
    space: CategorySpace = field(default=DEFAULT_SPACE)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.int32)
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "objects", tuple(self.objects))

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.grid.shape[0] and 0 <= c < self.grid.shape[1]

    def is_free(self, cell) -> bool:
        return self.in_bounds(cell) and self.grid[cell[0], cell[1]] != BLOCKED

    def region_at(self, cell) -> RegionInstance:
        rid = int(self.grid[cell[0], cell[1]])
        if rid == BLOCKED:
            raise ValueError(f"cell {cell} is blocked")
        return self.regions[rid]

    def objects_of(self, category: int) -> list[ObjectInstance]:
        return [o for o in self.objects if o.category == category]

    def free_cells(self) -> list[tuple[int, int]]:
        return [(int(r), int(c)) for r, c in zip(*np.nonzero(self.grid != BLOCKED))]

    def region_adjacency(self) -> set[tuple[int, int]]:
        """Pairs of region instance ids whose cells touch (a doorway)."""
        g = self.grid
        pairs = set()
        for a, b in ((g[:-1, :], g[1:, :]), (g[:, :-1], g[:, 1:])):
            mask = (a != BLOCKED) & (b != BLOCKED) & (a != b)
            for x, y in zip(a[mask], b[mask]):
                pairs.add((int(min(x, y)), int(max(x, y))))
        return pairs

    def euclidean_m(self, a, b) -> float:
        return self.cell_size * math.hypot(a[0] - b[0], a[1] - b[1])


# ---------------------------------------------------------------------------
# generation


def _bsp(rng, rows, cols, n, min_room):
    rects = [(1, 1, rows - 2, cols - 2)]
    if rows - 2 < min_room or cols - 2 < min_room:
        return None
    while len(rects) < n:
        order = sorted(range(len(rects)),
                       key=lambda i: (-(rects[i][2] - rects[i][0] + 1) * (rects[i][3] - rects[i][1] + 1), i))
        for i in order:
            r0, c0, r1, c1 = rects[i]
            h, w = r1 - r0 + 1, c1 - c0 + 1
            can_h = h >= 2 * min_room + 1
            can_w = w >= 2 * min_room + 1
            if not (can_h or can_w):
                continue
            horizontal = can_h and (h >= w or not can_w)
            if horizontal:
                wall = int(rng.integers(r0 + min_room, r1 - min_room + 1))
                new = [(r0, c0, wall - 1, c1), (wall + 1, c0, r1, c1)]
            else:
                wall = int(rng.integers(c0 + min_room, c1 - min_room + 1))
                new = [(r0, c0, r1, wall - 1), (r0, wall + 1, r1, c1)]
            rects[i:i + 1] = new
            break
        else:
            return None
    return rects


def _door_candidates(grid):
    rows, cols = grid.shape
    cands: dict[tuple[int, int], list] = {}
    for r in range(1, rows - 1):
        for c in range(1, cols - 1):
            if grid[r, c] != BLOCKED:
                continue
            up, down, left, right = grid[r - 1, c], grid[r + 1, c], grid[r, c - 1], grid[r, c + 1]
            for a, b, x, y in ((up, down, left, right), (left, right, up, down)):
                if a != BLOCKED and b != BLOCKED and a != b and x == BLOCKED and y == BLOCKED:
                    key = (int(min(a, b)), int(max(a, b)))
                    cands.setdefault(key, []).append((r, c))
    return cands


def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def _finalize_regions(grid, categories):
    rows, cols = grid.shape
    cells: dict[int, set] = {i: set() for i in range(len(categories))}
    doors: dict[int, set] = {i: set() for i in range(len(categories))}
    for r in range(rows):
        for c in range(cols):
            rid = int(grid[r, c])
            if rid == BLOCKED:
                continue
            cells[rid].add((r, c))
            for dr, dc in NEIGHBOURS:
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols and grid[rr, cc] not in (BLOCKED, rid):
                    doors[rid].add((r, c))
    return tuple(RegionInstance(i, int(categories[i]), frozenset(cells[i]), frozenset(doors[i]))
                 for i in range(len(categories)))


def _placement_cells(grid, reg: RegionInstance, margin: int) -> list:
    cells = sorted(reg.cells - reg.doorways) or sorted(reg.cells)
    if margin <= 0:
        return cells
    rows, cols = grid.shape
    inner = [(r, c) for r, c in cells
             if all(0 <= r + dr < rows and 0 <= c + dc < cols and grid[r + dr, c + dc] == reg.id
                    for dr in range(-margin, margin + 1) for dc in range(-margin, margin + 1))]
    return inner or cells


def generate_scene(config: SceneGenConfig, seed: int | None = None, scene_id: str | None = None) -> Scene:
    """Build a random scene; a pure function of ``(config, seed)``."""
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    n = config.n_regions
    for _ in range(config.max_retries):
        rects = _bsp(rng, config.rows, config.cols, n, config.min_room)
        if rects is None:
            continue
        grid = np.full((config.rows, config.cols), BLOCKED, dtype=np.int32)
        for i, (r0, c0, r1, c1) in enumerate(rects):
            grid[r0:r1 + 1, c0:c1 + 1] = i
        cands = _door_candidates(grid)
        pairs = sorted(cands)
        parent = list(range(n))
        chosen = []
        for k in rng.permutation(len(pairs)):
            a, b = pairs[k]
            ra, rb = _find(parent, a), _find(parent, b)
            if ra != rb:
                parent[ra] = rb
                chosen.append(pairs[k])
            elif rng.random() < config.extra_door_prob:
                chosen.append(pairs[k])
        if len({_find(parent, i) for i in range(n)}) != 1:
            continue
        for a, b in sorted(chosen):
            options = cands[(a, b)]
            r, c = options[int(rng.integers(len(options)))]
            grid[r, c] = a if rng.random() < 0.5 else b
        break
    else:
        raise SceneGenerationError(
            f"no connected layout with {n} rooms on a {config.rows}x{config.cols} grid "
            f"after {config.max_retries} attempts")

    prior = config.region_prior / config.region_prior.sum()
    categories = rng.choice(config.space.n_regions, size=n, p=prior)
    regions = _finalize_regions(grid, categories)

    objects = []
    for reg in regions:
        interior = _placement_cells(grid, reg, config.wall_margin)
        taken: set = set()
        for o in range(config.space.n_objects):
            p = config.placement[o, reg.category]
            for _ in range(config.copies):
                if rng.random() < p:
                    free = [cell for cell in interior if cell not in taken]
                    if not free:
                        continue
                    cell = free[int(rng.integers(len(free)))]
                    taken.add(cell)
                    objects.append(ObjectInstance(len(objects), o, cell))
    sid = scene_id if scene_id is not None else f"scene-{seed}"
    return Scene(sid, grid, regions, tuple(objects), config.cell_size, config.space)


def build_scene(rows: list[str], region_categories: list[str], objects: list[tuple[str, tuple[int, int]]],
                space: CategorySpace = DEFAULT_SPACE, cell_size: float = 0.3, scene_id: str = "hand") -> Scene:
    """Assemble a scene from a character map.

    ``rows`` uses ``#`` for blocked cells and one base-62 character per
    region instance id; ``region_categories[i]`` names the category of
    instance ``i``.
    """
    grid = np.array([[BLOCKED if ch == "#" else _CELL_CHARS.index(ch) for ch in row] for row in rows],
                    dtype=np.int32)
    cats = [space.region_index(name) for name in region_categories]
    regions = _finalize_regions(grid, cats)
    objs = []
    for i, (name, cell) in enumerate(objects):
        cell = (int(cell[0]), int(cell[1]))
        if grid[cell] == BLOCKED:
            raise ValueError(f"object {name} placed on blocked cell {cell}")
        objs.append(ObjectInstance(i, space.object_index(name), cell))
    return Scene(scene_id, grid, regions, tuple(objs), cell_size, space)


# ---------------------------------------------------------------------------
# geometric queries


def distance_field(scene: Scene, source) -> np.ndarray:
    """BFS step counts from ``source`` to every cell; -1 where unreachable."""
    grid = scene.grid
    rows, cols = grid.shape
    dist = np.full((rows, cols), -1, dtype=np.int64)
    if not scene.is_free(source):
        raise ValueError(f"source {source} is not a free cell")
    dist[source] = 0
    queue = deque([tuple(source)])
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for dr, dc in NEIGHBOURS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols and dist[rr, cc] < 0 and grid[rr, cc] != BLOCKED:
                dist[rr, cc] = d
                queue.append((rr, cc))
    return dist


def _bfs_parents(scene: Scene, source, goal=None):
    grid = scene.grid
    rows, cols = grid.shape
    parent = {tuple(source): None}
    queue = deque([tuple(source)])
    while queue:
        cur = queue.popleft()
        if goal is not None and cur == goal:
            break
        r, c = cur
        for dr, dc in NEIGHBOURS:
            nxt = (r + dr, c + dc)
            if nxt not in parent and 0 <= nxt[0] < rows and 0 <= nxt[1] < cols \
                    and grid[nxt] != BLOCKED:
                parent[nxt] = cur
                queue.append(nxt)
    return parent


def _unwind(parent, goal):
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def geodesic_path(scene: Scene, start, goal) -> tuple[list[tuple[int, int]], float]:
    """Shortest 4-connected path and its length in metres."""
    start, goal = (int(start[0]), int(start[1])), (int(goal[0]), int(goal[1]))
    for cell in (start, goal):
        if not scene.is_free(cell):
            raise ValueError(f"cell {cell} is not free")
    parent = _bfs_parents(scene, start, goal)
    if goal not in parent:
        raise NoPathError(f"no path from {start} to {goal} in {scene.id}")
    path = _unwind(parent, goal)
    return path, (len(path) - 1) * scene.cell_size


def path_to_nearest(scene: Scene, start, goals) -> tuple[list[tuple[int, int]], float]:
    """Shortest path from ``start`` to whichever of ``goals`` is nearest.

    Equal-distance goals resolve to the one the BFS dequeues first.
    """
    goals = {(int(g[0]), int(g[1])) for g in goals}
    start = (int(start[0]), int(start[1]))
    if not goals:
        raise NoPathError("no goal cells given")
    grid = scene.grid
    rows, cols = grid.shape
    parent = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur in goals:
            path = _unwind(parent, cur)
            return path, (len(path) - 1) * scene.cell_size
        r, c = cur
        for dr, dc in NEIGHBOURS:
            nxt = (r + dr, c + dc)
            if nxt not in parent and 0 <= nxt[0] < rows and 0 <= nxt[1] < cols \
                    and grid[nxt] != BLOCKED:
                parent[nxt] = cur
                queue.append(nxt)
    raise NoPathError(f"none of the goal cells is reachable from {start}")


def line_cells(a, b) -> list[tuple[int, int]]:
    """Bresenham raster line from ``a`` to ``b`` including both ends."""
    r0, c0 = a
    r1, c1 = b
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 > r0 else -1
    sc = 1 if c1 > c0 else -1
    err = dc - dr
    cells = [(r0, c0)]
    r, c = r0, c0
    while (r, c) != (r1, c1):
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
        cells.append((r, c))
    return cells


def line_of_sight(scene: Scene, a, b) -> bool:
    grid = scene.grid
    return all(grid[r, c] != BLOCKED for r, c in line_cells(a, b))


def visible_objects(scene: Scene, pose: Pose, radius_m: float) -> list[ObjectInstance]:
    """Objects within ``radius_m`` with an unobstructed raster line to the agent.

    Sensing is omnidirectional; heading is ignored. Sorted by distance, then id.
    """
    if radius_m <= 0:
        raise ValueError("radius_m must be positive")
    out = []
    for obj in scene.objects:
        d = scene.euclidean_m(pose.cell, obj.cell)
        if d <= radius_m and line_of_sight(scene, pose.cell, obj.cell):
            out.append((d, obj.id, obj))
    out.sort(key=lambda t: (t[0], t[1]))
    return [t[2] for t in out]


def region_sequence_of_path(scene: Scene, path) -> list[int]:
    """Region categories visited along ``path``, consecutive repeats collapsed."""
    seq: list[int] = []
    for cell in path:
        cat = scene.region_at(cell).category
        if not seq or seq[-1] != cat:
            seq.append(cat)
    return seq


# ---------------------------------------------------------------------------
# persistence


def scene_to_dict(scene: Scene) -> dict:
    rows = ["".join("#" if v == BLOCKED else _CELL_CHARS[v] for v in row) for row in scene.grid]
    return {
        "format_version": SCENE_FORMAT_VERSION,
        "category_space_hash": scene.space.hash(),
        "category_space": scene.space.to_dict(),
        "id": scene.id,
        "cell_size": scene.cell_size,
        "grid": rows,
        "regions": [{"id": r.id, "category": scene.space.regions[r.category]} for r in scene.regions],
        "objects": [{"id": o.id, "category": scene.space.objects[o.category], "cell": list(o.cell)}
                    for o in scene.objects],
    }


def scene_from_dict(d: dict) -> Scene:
    if d.get("format_version") != SCENE_FORMAT_VERSION:
        raise ValueError(f"unsupported scene format_version {d.get('format_version')!r}")
    space = CategorySpace.from_dict(d["category_space"])
    if space.hash() != d["category_space_hash"]:
        raise ValueError("scene category_space_hash does not match its category space")
    regions = sorted(d["regions"], key=lambda r: r["id"])
    objects = sorted(d["objects"], key=lambda o: o["id"])
    scene = build_scene(d["grid"], [r["category"] for r in regions],
                        [(o["category"], tuple(o["cell"])) for o in objects],
                        space=space, cell_size=d["cell_size"], scene_id=d["id"])
    return scene


def dumps_scene(scene: Scene) -> str:
    return json.dumps(scene_to_dict(scene), indent=1) + "\n"


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_scene(scene))


def load_scene(path) -> Scene:
    with open(path) as fh:
        return scene_from_dict(json.load(fh))
