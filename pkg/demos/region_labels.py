"""Label the rooms around a robot from the objects it can see.

Builds the relational graph from 30 generated houses, then drops a robot
into an unseen house and prints each visible object's region estimate.

    python demos/region_labels.py [seed]
"""
import sys

import numpy as np

from srgnav.bayes import RegionEstimator
from srgnav.graph import build_srg, extract_scene_graph
from srgnav.presets import house_config
from srgnav.world import Pose, generate_scene, visible_objects


def main(seed: int = 9000):
    cfg = house_config()
    sp = cfg.space
    srg = build_srg([extract_scene_graph(generate_scene(cfg, 1000 + i)) for i in range(30)], sp)
    estimator = RegionEstimator(srg)
    scene = generate_scene(cfg, seed)
    cells = scene.free_cells()
    pose = Pose(cells[np.random.default_rng(seed).integers(len(cells))])
    seen = visible_objects(scene, pose, 10.0)
    print(f"robot at {pose.cell} in the {sp.regions[scene.region_at(pose.cell).category]}; "
          f"{len(seen)} objects in view")
    by_id = {o.id: o for o in seen}
    correct = 0
    for est in estimator.visible_regions(seen, 4).values():
        truth = sp.regions[scene.region_at(est.obj.cell).category]
        guess = sp.regions[est.region]
        correct += guess == truth
        cands = ", ".join(sp.objects[by_id[c].category] for c in est.candidates)
        mark = "ok" if guess == truth else f"wrong, truly {truth}"
        print(f"  {sp.objects[est.obj.category]:<18} -> {guess:<12} p={est.posterior.probs[est.region]:.3f}"
              f"  [{cands}]  {mark}")
    if seen:
        print(f"{correct}/{len(seen)} labels correct")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:]))
