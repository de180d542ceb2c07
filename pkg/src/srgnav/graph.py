"""Scene graphs and the spatial relational graph (SRG).

Each scene yields a graph of region instances (joined where they share a
doorway) and object instances (attached to the room containing them). The
SRG folds a set of such graphs into category-level statistics:

* includes weight ``w(o, r)`` = rooms of category ``r`` holding at least one
  ``o``, divided by the number of rooms of category ``r``;
* adjacency weight ``w(r_i, r_j)`` = doorway-sharing instance pairs of the
  two categories, divided by ``min(freq(r_i), freq(r_j))``, clamped to 1.

Frequencies count region instances, so a category occurring twice in one
scene counts twice.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .categories import CategorySpace, DEFAULT_SPACE
from .world import Scene

log = logging.getLogger(__name__)

SRG_FORMAT_VERSION = 1
INCLUDES = "includes"
ADJACENCY = "adjacency"


@dataclass(frozen=True)
class SceneGraph:
    scene_id: str
    region_nodes: tuple  # (instance id, region category)
    object_nodes: tuple  # (object id, object category)
    adjacency_edges: tuple  # (instance id, instance id), smaller id first
    includes_edges: tuple  # (object id, instance id)


def extract_scene_graph(scene: Scene) -> SceneGraph:
    regions = tuple((r.id, r.category) for r in scene.regions)
    objects = tuple((o.id, o.category) for o in scene.objects)
    adjacency = tuple(sorted(scene.region_adjacency()))
    includes = tuple((o.id, scene.region_at(o.cell).id) for o in scene.objects)
    return SceneGraph(scene.id, regions, objects, adjacency, includes)


@dataclass(frozen=True, eq=False)
class SRG:
    """Category-level graph with edge weights in [0, 1].

    ``weights`` is an N x N symmetric matrix over ``space.node_names`` with
    NaN where there is no edge. Region-region entries are adjacency edges and
    object-region entries are includes edges.
    """

    space: CategorySpace
    n_graphs: int
    region_freq: np.ndarray
    includes_count: np.ndarray
    co_adjacency: np.ndarray
    weights: np.ndarray
    pruned_at: float | None = None

    def __post_init__(self):
        for name in ("region_freq", "includes_count", "co_adjacency", "weights"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def edges(self) -> list[tuple[int, int, str, float]]:
        """``(u, v, kind, weight)`` with ``u < v`` in node order."""
        nr = self.space.n_regions
        out = []
        us, vs = np.nonzero(np.triu(~np.isnan(self.weights), 1))
        for u, v in zip(us.tolist(), vs.tolist()):
            kind = ADJACENCY if v < nr else INCLUDES
            out.append((u, v, kind, float(self.weights[u, v])))
        return out

    def weight(self, a: str, b: str) -> float | None:
        w = self.weights[self.space.node_index(a), self.space.node_index(b)]
        return None if np.isnan(w) else float(w)

    def includes_matrix(self) -> np.ndarray:
        """``p(o | r)`` as an ``n_objects x n_regions`` array (0 where no edge)."""
        nr = self.space.n_regions
        return np.nan_to_num(self.weights[nr:, :nr], nan=0.0)


def build_srg(scene_graphs, space: CategorySpace = DEFAULT_SPACE) -> SRG:
    scene_graphs = list(scene_graphs)
    if not scene_graphs:
        raise ValueError("build_srg needs at least one scene graph")
    nr, no = space.n_regions, space.n_objects
    freq = np.zeros(nr, dtype=np.int64)
    inc = np.zeros((no, nr), dtype=np.int64)
    co = np.zeros((nr, nr), dtype=np.int64)
    for g in scene_graphs:
        cat_of = dict(g.region_nodes)
        for _, cat in g.region_nodes:
            freq[cat] += 1
        obj_cat = dict(g.object_nodes)
        held = {(obj_cat[oid], rid) for oid, rid in g.includes_edges}
        for ocat, rid in held:
            inc[ocat, cat_of[rid]] += 1
        for a, b in g.adjacency_edges:
            ca, cb = cat_of[a], cat_of[b]
            co[ca, cb] += 1
            if ca != cb:
                co[cb, ca] += 1

    n = space.n_nodes
    w = np.full((n, n), np.nan)
    for r in range(nr):
        if freq[r] == 0:
            continue
        for o in range(no):
            if inc[o, r] > 0:
                w[nr + o, r] = w[r, nr + o] = inc[o, r] / freq[r]
    for i in range(nr):
        for j in range(i + 1, nr):
            if co[i, j] > 0:
                val = co[i, j] / min(freq[i], freq[j])
                if val > 1.0:
                    log.info("clamping adjacency weight %s-%s from %.3f to 1.0",
                             space.regions[i], space.regions[j], val)
                    val = 1.0
                w[i, j] = w[j, i] = val
    return SRG(space, len(scene_graphs), freq, inc, co, w)


def prune_srg(srg: SRG, threshold: float = 0.5) -> SRG:
    """Drop every edge whose weight is ``<= threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    w = np.array(srg.weights)
    w[~(w > threshold)] = np.nan
    return SRG(srg.space, srg.n_graphs, srg.region_freq, srg.includes_count,
               srg.co_adjacency, w, pruned_at=threshold)


def srg_to_gcn_inputs(pruned: SRG, space: CategorySpace | None = None):
    """Binary adjacency and one-hot node features for the GCN."""
    space = pruned.space if space is None else space
    if space.hash() != pruned.space.hash():
        raise ValueError("SRG was built over a different category space")
    n = space.n_nodes
    adj = (~np.isnan(pruned.weights)).astype(float)
    np.fill_diagonal(adj, 0.0)
    return adj, np.eye(n)


def export_dot(srg: SRG) -> str:
    """Graphviz text; only nodes touching an edge are listed."""
    names = srg.space.node_names
    nr = srg.space.n_regions
    edges = srg.edges()
    used = sorted({u for u, _, _, _ in edges} | {v for _, v, _, _ in edges})
    lines = ["graph SRG {"]
    for u in used:
        kind = "region" if u < nr else "object"
        lines.append(f'  "{names[u]}" [type={kind}];')
    for u, v, kind, wt in edges:
        lines.append(f'  "{names[u]}" -- "{names[v]}" [type={kind}, label="{wt:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# persistence


def srg_to_dict(srg: SRG) -> dict:
    names = srg.space.node_names
    return {
        "format_version": SRG_FORMAT_VERSION,
        "category_space_hash": srg.space.hash(),
        "category_space": srg.space.to_dict(),
        "n_graphs": srg.n_graphs,
        "pruned_at": srg.pruned_at,
        "region_freq": srg.region_freq.tolist(),
        "includes_count": srg.includes_count.tolist(),
        "co_adjacency": srg.co_adjacency.tolist(),
        "edges": [[names[u], names[v], kind, wt] for u, v, kind, wt in srg.edges()],
    }


def srg_from_dict(d: dict) -> SRG:
    if d.get("format_version") != SRG_FORMAT_VERSION:
        raise ValueError(f"unsupported SRG format_version {d.get('format_version')!r}")
    space = CategorySpace.from_dict(d["category_space"])
    if space.hash() != d["category_space_hash"]:
        raise ValueError("SRG category_space_hash does not match its category space")
    n = space.n_nodes
    w = np.full((n, n), np.nan)
    for a, b, _, wt in d["edges"]:
        u, v = space.node_index(a), space.node_index(b)
        w[u, v] = w[v, u] = wt
    return SRG(space, d["n_graphs"], np.array(d["region_freq"], dtype=np.int64),
               np.array(d["includes_count"], dtype=np.int64),
               np.array(d["co_adjacency"], dtype=np.int64), w, d["pruned_at"])


def dumps_srg(srg: SRG) -> str:
    return json.dumps(srg_to_dict(srg), indent=1) + "\n"


def save_srg(srg: SRG, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_srg(srg))


def load_srg(path) -> SRG:
    with open(path) as fh:
        return srg_from_dict(json.load(fh))
