"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from oracles import central_difference, relative_error, tally_weights  # noqa: E402
from srgnav.bayes import RegionEstimator, RegionPosterior  # noqa: E402
from srgnav.categories import DEFAULT_SPACE  # noqa: E402
from srgnav.cli import main as cli_main  # noqa: E402
from srgnav.gcn import (  # noqa: E402
    GcnModel, TrainConfig, backward, count_loss_and_grad, gcn_forward, normalized_adjacency,
    pair_count_matrices, pair_loss_and_grad, train,
)
from srgnav.graph import SRG, build_srg, extract_scene_graph, prune_srg  # noqa: E402
from srgnav.metrics import compare_policies, mean_dts, soft_spl, spl, success_rate  # noqa: E402
from srgnav.navigator import EpisodeConfig, EpisodeRecord, Policy  # noqa: E402
from srgnav.presets import house_config, tiny_config  # noqa: E402
from srgnav.trajectories import Trajectory, generate_corpus, make_negative_pairs, make_positive_pairs  # noqa: E402
from srgnav.world import Pose, generate_scene, visible_objects  # noqa: E402

RESULTS = []
CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# -- helpers


def includes_srg(space, table):
    nr, n = space.n_regions, space.n_nodes
    w = np.full((n, n), np.nan)
    for o, r in zip(*np.nonzero(table)):
        w[nr + o, r] = w[r, nr + o] = table[o, r]
    return SRG(space, 1, np.ones(nr, dtype=np.int64), np.zeros((space.n_objects, nr), dtype=np.int64),
               np.zeros((nr, nr), dtype=np.int64), w)


def brute_posterior(table, cands, eps=1e-4):
    scores = [math.prod(max(table[o, r], eps) for o in cands) for r in range(table.shape[1])]
    total = sum(scores)
    return np.array([s / total for s in scores])


@pytest.fixture(scope="module")
def benchmark():
    """30 training / 5 held-out house scenes, 50 episodes per scene, all three policies."""
    start = time.perf_counter()
    cfg = house_config()
    train_scenes = [generate_scene(cfg, 1000 + i, f"train-{i}") for i in range(30)]
    test_scenes = [generate_scene(cfg, 5000 + i, f"test-{i}") for i in range(5)]
    srg = build_srg([extract_scene_graph(s) for s in train_scenes], cfg.space)
    result = train(prune_srg(srg), generate_corpus(train_scenes), TrainConfig(epochs=1000, patience=None))
    policies = {"srg_gcn": Policy("srg_gcn", srg, result.embeddings), "random": Policy("random"),
                "greedy_unexplored": Policy("greedy_unexplored")}
    out = compare_policies(test_scenes, policies, 50, 7, EpisodeConfig(max_steps=350))
    return cfg, out, time.perf_counter() - start


# -- criteria


def test_01_counting_oracle():
    rng = np.random.default_rng(0)
    cfg = tiny_config()
    start = time.perf_counter()
    edges = 0
    mismatches = 0
    for _ in range(50):
        seeds = rng.integers(0, 10**6, int(rng.integers(1, 6)))
        graphs = [extract_scene_graph(generate_scene(cfg, int(s))) for s in seeds]
        srg = build_srg(graphs, cfg.space)
        names = cfg.space.node_names
        got = {frozenset((names[u], names[v])): w for u, v, _, w in srg.edges()}
        want = tally_weights(graphs, cfg.space)
        edges += len(want)
        mismatches += set(got) != set(want) or any(got[k] != float(f) for k, f in want.items())
    elapsed = time.perf_counter() - start
    report(1, "counting oracle", mismatches == 0 and elapsed < 10,
           f"{mismatches} mismatching sets of 50 ({edges} edges), {elapsed:.1f} s (limit 10 s)")


def test_02_pruning_boundary():
    space = DEFAULT_SPACE
    table = np.zeros((space.n_objects, space.n_regions))
    bed, sink = space.object_index("bed"), space.object_index("sink")
    table[bed, space.region_index("bedroom")] = 0.5
    table[sink, space.region_index("kitchen")] = 0.5 + 1e-9
    pruned = prune_srg(includes_srg(space, table), 0.5)
    dropped = pruned.weight("bed", "bedroom") is None
    kept = pruned.weight("sink", "kitchen") == 0.5 + 1e-9
    report(2, "pruning boundary", dropped and kept, f"0.5 removed={dropped}, 0.5+1e-9 kept={kept}")


def test_03_gradient_verification():
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    worst = 0.0
    for i in range(24):
        n = int(rng.integers(2, 11))
        upper = np.triu((rng.random((n, n)) < 0.4).astype(float), 1)
        a_hat = normalized_adjacency(upper + upper.T)
        dims = [n, int(rng.integers(2, 7)), int(rng.integers(2, 7)), int(rng.integers(2, 5))]
        model = GcnModel([rng.normal(0, 0.8, (dims[j], dims[j + 1])) for j in range(3)], "relu")
        a = rng.integers(0, n, 12)
        pairs = np.stack([a, (a + rng.integers(1, n, 12)) % n, rng.integers(0, 2, 12)], axis=1)
        pos, neg = pair_count_matrices(pairs, n)

        def loss():
            emb = gcn_forward(model, a_hat, np.eye(n))[0]
            return count_loss_and_grad(emb, pos, neg)[0] if i % 2 else pair_loss_and_grad(emb, pairs)[0]

        emb, cache = gcn_forward(model, a_hat, np.eye(n))
        d_emb = count_loss_and_grad(emb, pos, neg)[1] if i % 2 else pair_loss_and_grad(emb, pairs)[1]
        for g, w in zip(backward(model, cache, d_emb), model.weights):
            worst = max(worst, relative_error(g, central_difference(loss, w)))
    elapsed = time.perf_counter() - start
    report(3, "gradient verification", worst < 1e-4 and elapsed < 30,
           f"24 instances, worst relative error {worst:.2e} (limit 1e-4), {elapsed:.1f} s (limit 30 s)")


def test_04_bayes_correctness():
    rng = np.random.default_rng(0)
    space = DEFAULT_SPACE
    worst = 0.0
    exact = True
    for _ in range(100):
        table = rng.random((space.n_objects, space.n_regions)) * (rng.random((space.n_objects, space.n_regions)) < 0.3)
        cands = rng.integers(0, space.n_objects, int(rng.integers(1, 6))).tolist()
        est = RegionEstimator(includes_srg(space, table))
        post = est.posterior(cands)
        worst = max(worst, float(np.max(np.abs(post.probs - brute_posterior(table, cands)))))
        # power-of-two scaling is exact in floating point; any other factor rounds
        binary = RegionPosterior(post.scores * 2.0 ** int(rng.integers(-20, 20)), post.objects)
        exact &= np.array_equal(binary.probs, post.probs) and binary.argmax == post.argmax
        scaled = RegionPosterior(post.scores * float(rng.uniform(1e-3, 1e3)), post.objects)
        exact &= scaled.argmax == post.argmax and bool(np.max(np.abs(scaled.probs - post.probs)) <= 1e-12)
        inc = est.prior()
        for o in cands:
            inc = inc.update(est.likelihood, o)
        exact &= np.array_equal(inc.scores, post.scores)
    report(4, "Bayes correctness", worst <= 1e-12 and exact,
           f"100 cases, worst deviation {worst:.1e} (limit 1e-12), scale invariance and incremental=batch {exact}")


def test_05_region_label_recovery():
    cfg = house_config()
    # per-room chance that an object category appears, from the generator priors
    present = 1.0 - (1.0 - cfg.placement) ** cfg.copies
    dominant = present.max(axis=1)
    others = np.sort(present, axis=1)[:, -2]
    peaked = bool(dominant.min() >= 0.8 and others.max() <= 0.1)
    train_scenes = [generate_scene(cfg, 1000 + i) for i in range(30)]
    est = RegionEstimator(build_srg([extract_scene_graph(s) for s in train_scenes], cfg.space))
    rng = np.random.default_rng(0)
    ok = total = 0
    for i in range(20):
        scene = generate_scene(cfg, 9000 + i)
        cells = scene.free_cells()
        for cell in (cells[j] for j in rng.integers(len(cells), size=10)):
            for e in est.visible_regions(visible_objects(scene, Pose(cell), 10.0), 4).values():
                total += 1
                ok += e.region == scene.region_at(e.obj.cell).category
    rate = ok / total
    report(5, "region-label recovery", peaked and rate >= 0.9,
           f"{ok}/{total} = {rate:.3f} (limit 0.90) over 20 held-out scenes, k=4; "
           f"priors dominant >= {dominant.min():.3f}, others <= {others.max():.3f}")


def test_06_metric_formulas():
    rng = np.random.default_rng(0)
    worst = 0.0
    ordered = True
    for _ in range(200):
        recs = []
        for i in range(int(rng.integers(1, 40))):
            l, p, d = float(rng.uniform(0.3, 20)), float(rng.uniform(0, 60)), float(rng.uniform(0, 15))
            recs.append(EpisodeRecord(f"e{i}", "s", "random", 0, Pose((0, 0)), bool(rng.random() < 0.5), 0,
                                      p, l, d, float(rng.uniform(0, d + 1)), "x"))
        n = len(recs)
        want = {
            spl: sum(r.shortest_m / max(r.path_m, r.shortest_m) for r in recs if r.success) / n,
            soft_spl: sum((1 - r.terminal_geodesic_m / max(r.shortest_m, r.terminal_geodesic_m))
                          * r.shortest_m / max(r.path_m, r.shortest_m) for r in recs) / n,
            mean_dts: sum(max(r.terminal_euclid_m - 1.0, 0.0) for r in recs) / n,
            success_rate: sum(r.success for r in recs) / n,
        }
        worst = max(worst, max(abs(f(recs) - v) for f, v in want.items()))
        ordered &= spl(recs) <= success_rate(recs)
    report(6, "metric formulas", worst <= 1e-12 and ordered,
           f"200 record sets, worst deviation {worst:.1e} (limit 1e-12), SPL <= Success on all: {ordered}")


def test_07_policy_ordering(benchmark):
    cfg, out, elapsed = benchmark
    s = {name: rep.aggregate["success"] for name, (rep, _) in out.items()}
    shape = cfg.space.n_regions >= 4 and cfg.space.n_objects >= 8
    ok = shape and s["srg_gcn"] >= s["random"] + 0.30 and s["srg_gcn"] >= s["greedy_unexplored"] \
        and elapsed < 600
    report(7, "policy ordering", ok,
           f"Success srg_gcn {s['srg_gcn']:.3f}, random {s['random']:.3f}, greedy {s['greedy_unexplored']:.3f} "
           f"(30/5 scenes, 50 episodes each), {elapsed:.0f} s (limit 600 s)")


def test_random_baseline_rarely_succeeds(benchmark):
    _, out, _ = benchmark
    assert out["random"][0].aggregate["success"] <= 0.1


def test_08_worked_example_pairs():
    sp = DEFAULT_SPACE
    t = Trajectory("w", sp.object_index("bed"), tuple(sp.region_index(r) for r in ("living room", "hallway", "bedroom")),
                   1.0)
    names = sp.node_names
    pos = sorted((names[p.anchor], names[p.other]) for p in make_positive_pairs(t, sp))
    pool = [sp.region_index(r) for r in ("living room", "hallway", "bedroom", "bathroom", "dining room")]
    neg = sorted((names[p.anchor], names[p.other]) for p in make_negative_pairs(t, sp, pool))
    want_pos = sorted([("hallway", "bedroom"), ("hallway", "living room"), ("bedroom", "bed")])
    want_neg = [("bathroom", "bed"), ("dining room", "bed")]
    report(8, "worked-example pairs", pos == want_pos and neg == want_neg, f"positives {pos}, negatives {neg}")


def _pipeline(ws: Path) -> None:
    steps = [["generate", str(CONFIGS / "tiny.json"), "--scenes", "4", "--eval-scenes", "2", "--seed", "11"],
             ["trajectories"], ["build-srg"], ["train", "--epochs", "40"],
             ["evaluate", "--policy", "srg_gcn", "--episodes-per-scene", "4"],
             ["evaluate", "--policy", "greedy", "--episodes-per-scene", "4"]]
    for argv in steps:
        assert cli_main([argv[0], "-w", str(ws), *argv[1:]]) == 0


def test_09_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _pipeline(a)
    _pipeline(b)
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    differing = [str(f) for f in files if (a / f).read_bytes() != (b / f).read_bytes()]
    must = {"srg.json", "srg_pruned.json", "checkpoint.json", "reports/srg_gcn.json"}
    present = must <= {str(f) for f in files}
    report(9, "determinism", present and not differing,
           f"{len(files)} files compared, differing: {differing or 'none'}")


def test_10_transparency_trace(benchmark):
    cfg, out, _ = benchmark
    records = out["srg_gcn"][1]
    decisions = [d for r in records for d in r.decisions]
    regions = set(cfg.space.regions)
    bad = 0
    for d in decisions:
        ests = d["region_estimates"]
        bad += any(not e["candidate_objects"] or set(e["scores"]) != regions for e in ests)
        bad += d["kind"] == "region" and (not ests or set(d["similarities"]) - regions != set())
    n_region = sum(d["kind"] == "region" for d in decisions)
    report(10, "transparency trace", bad == 0 and n_region > 0,
           f"{len(decisions)} decisions ({n_region} region choices), {bad} missing candidates or scores")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
