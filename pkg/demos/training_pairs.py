"""Training pairs from one valid trajectory in a three-room corridor.

    python demos/training_pairs.py
"""
from srgnav.categories import DEFAULT_SPACE as SP
from srgnav.trajectories import generate_valid_trajectory, make_negative_pairs, make_positive_pairs
from srgnav.world import Pose, build_scene

ROWS = [
    "00000#11111#22222",
    "00000011111122222",
    "00000#11111#22222",
]


def main():
    scene = build_scene(ROWS, ["living room", "hallway", "bedroom"],
                        [("sofa", (0, 0)), ("picture", (0, 8)), ("bed", (1, 15))])
    traj = generate_valid_trajectory(scene, Pose((1, 0)), SP.object_index("bed"))
    names = SP.node_names
    print("valid trajectory:", " -> ".join(SP.regions[r] for r in traj.regions), f"({traj.length_m:.1f} m)")
    print("positive pairs:")
    for p in make_positive_pairs(traj):
        print(f"  {names[p.anchor]:<12} {names[p.other]}")
    pool = [SP.region_index(r) for r in ("living room", "hallway", "bedroom", "bathroom", "dining room")]
    print("negative pairs (regions restricted to a five-room house):")
    for p in make_negative_pairs(traj, SP, pool):
        print(f"  {names[p.anchor]:<12} {names[p.other]}")


if __name__ == "__main__":
    main()
