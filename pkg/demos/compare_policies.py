"""Train embeddings and compare the three navigation policies.

A smaller version of the acceptance benchmark (about ten seconds).

    python demos/compare_policies.py
"""
from srgnav.gcn import TrainConfig, train
from srgnav.graph import build_srg, extract_scene_graph, prune_srg
from srgnav.metrics import compare_policies, format_table
from srgnav.navigator import Policy
from srgnav.presets import house_config
from srgnav.trajectories import generate_corpus
from srgnav.world import generate_scene


def main():
    cfg = house_config()
    train_scenes = [generate_scene(cfg, 1000 + i, f"train-{i}") for i in range(15)]
    test_scenes = [generate_scene(cfg, 5000 + i, f"test-{i}") for i in range(3)]
    srg = build_srg([extract_scene_graph(s) for s in train_scenes], cfg.space)
    result = train(prune_srg(srg), generate_corpus(train_scenes), TrainConfig(epochs=500, patience=None))
    print(f"trained on {result.n_pairs} pairs, loss {result.loss_history[0]:.3f} -> {result.loss_history[-1]:.3f}")
    policies = {"srg_gcn": Policy("srg_gcn", srg, result.embeddings), "random": Policy("random"),
                "greedy_unexplored": Policy("greedy_unexplored")}
    out = compare_policies(test_scenes, policies, 20, 7)
    print(format_table([rep for rep, _ in out.values()]), end="")


if __name__ == "__main__":
    main()
