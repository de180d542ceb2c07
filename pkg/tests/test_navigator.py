import math
from collections import Counter

import numpy as np
import pytest

from srgnav import navigator
from srgnav.bayes import RegionEstimate, RegionPosterior, visible_regions
from srgnav.categories import DEFAULT_SPACE
from srgnav.gcn import EmbeddingTable
from srgnav.graph import build_srg, extract_scene_graph
from srgnav.navigator import (
    ACTIONS, EpisodeConfig, EpisodeSpec, NoDecision, Policy, run_episode, random_policy_step,
    sample_episodes, select_next_region, specs_hash,
)
from srgnav.presets import tiny_config
from srgnav.trajectories import generate_valid_trajectory
from srgnav.world import NoPathError, ObjectInstance, Pose, build_scene, generate_scene, line_of_sight

SP = DEFAULT_SPACE
STEP = {0: (0, 1), 3: (-1, 0), 6: (0, -1), 9: (1, 0)}


def replay(scene, start: Pose, actions: str):
    """Cells occupied after every action, from an independent pose model."""
    cell, heading = start.cell, start.heading
    cells = [cell]
    for a in actions:
        if a in "LR":
            heading = (heading + (1 if a == "L" else -1)) % 12
        else:
            nearest = min(STEP, key=lambda h: min((heading - h) % 12, (h - heading) % 12))
            dr, dc = STEP[nearest]
            if a == "B":
                dr, dc = -dr, -dc
            nxt = (cell[0] + dr, cell[1] + dc)
            if scene.is_free(nxt):
                cell = nxt
        cells.append(cell)
    return cells


def table_from(vectors: dict, dim=4, space=SP) -> EmbeddingTable:
    rng = np.random.default_rng(0)
    rows = []
    for name in space.node_names:
        rows.append(vectors.get(name, 0.01 * rng.normal(size=dim)))
    return EmbeddingTable(space.node_names, np.array(rows, dtype=float))


def estimates_for(srg, objects):
    return visible_regions(srg, objects, k=0)


class TestSelectNextRegion:
    def srg(self, corridor_scene):
        return build_srg([extract_scene_graph(corridor_scene)], SP)

    def test_single_region(self, corridor_scene):
        est = estimates_for(self.srg(corridor_scene), [ObjectInstance(0, SP.object_index("sofa"), (0, 0))])
        choice = select_next_region(table_from({}), est, SP.object_index("bed"), SP)
        assert SP.regions[choice.region] == "living room"
        assert choice.anchors == (0,)

    def test_prefers_aligned_embedding(self, corridor_scene):
        table = table_from({"bedroom": np.array([1.0, 0, 0, 0]), "bed": np.array([1.0, 0, 0, 0]),
                            "kitchen": np.array([0, 1.0, 0, 0])})
        srg = build_srg([extract_scene_graph(build_scene(
            ["0000#1111", "000001111"], ["bedroom", "kitchen"], [("bed", (0, 0)), ("sink", (0, 8))]))], SP)
        objs = [ObjectInstance(0, SP.object_index("bed"), (0, 0)), ObjectInstance(1, SP.object_index("sink"), (0, 8))]
        choice = select_next_region(table, estimates_for(srg, objs), SP.object_index("bed"), SP)
        assert SP.regions[choice.region] == "bedroom"
        assert choice.similarities[SP.region_index("bedroom")] == pytest.approx(1.0)
        assert choice.similarities[SP.region_index("kitchen")] == pytest.approx(0.0)

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(1)
        for trial in range(10):
            table = EmbeddingTable(SP.node_names, rng.normal(size=(SP.n_nodes, 6)))
            regions = rng.choice(SP.n_regions, 5, replace=False)
            visible = {i: RegionEstimate(ObjectInstance(i, 0, (0, i)), int(r), (i,), RegionPosterior(np.ones(1)))
                       for i, r in enumerate(regions)}
            target = int(rng.integers(SP.n_objects))
            t = table[SP.object_node(target)]

            def cos(v):
                return float(t @ v / (np.linalg.norm(t) * np.linalg.norm(v)))
            best = max(sorted(regions), key=lambda r: cos(table[int(r)]))
            assert select_next_region(table, visible, target, SP).region == best

    def test_empty_visible(self):
        with pytest.raises(NoDecision):
            select_next_region(table_from({}), {}, 0, SP)

    def test_zero_norm_region_never_wins(self):
        table = table_from({"bedroom": np.zeros(4), "kitchen": np.array([-1.0, 0, 0, 0]),
                            "bed": np.array([1.0, 0, 0, 0])})
        visible = {0: RegionEstimate(ObjectInstance(0, 0, (0, 0)), SP.region_index("bedroom"), (0,),
                                     RegionPosterior(np.ones(1))),
                   1: RegionEstimate(ObjectInstance(1, 0, (0, 1)), SP.region_index("kitchen"), (1,),
                                     RegionPosterior(np.ones(1)))}
        choice = select_next_region(table, visible, SP.object_index("bed"), SP)
        assert SP.regions[choice.region] == "kitchen"
        assert choice.similarities[SP.region_index("bedroom")] == -math.inf

    def test_ties_go_to_lower_index(self):
        v = np.array([1.0, 0, 0, 0])
        table = table_from({"bedroom": v, "kitchen": v, "bed": v})
        visible = {i: RegionEstimate(ObjectInstance(i, 0, (0, i)), SP.region_index(n), (i,),
                                     RegionPosterior(np.ones(1)))
                   for i, n in enumerate(["kitchen", "bedroom"])}
        assert select_next_region(table, visible, SP.object_index("bed"), SP).region == \
            min(SP.region_index("kitchen"), SP.region_index("bedroom"))


class TestRandomStep:
    def test_reproducible(self):
        rng1, rng2 = np.random.default_rng(3), np.random.default_rng(3)
        seq1 = [random_policy_step(Pose((0, 0)), rng1) for _ in range(50)]
        seq2 = [random_policy_step(Pose((0, 0)), rng2) for _ in range(50)]
        assert seq1 == seq2

    def test_uniform(self):
        rng = np.random.default_rng(4)
        counts = Counter(random_policy_step(Pose((0, 0)), rng) for _ in range(10_000))
        assert set(counts) == set(ACTIONS)
        chi2 = sum((c - 2500) ** 2 / 2500 for c in counts.values())
        assert chi2 < 16.27  # 3 dof, p = 0.001

    def test_corner_never_leaves_grid(self):
        scene = build_scene(["00", "00"], ["kitchen"], [("sink", (1, 1))])
        spec = EpisodeSpec("c", scene.id, SP.object_index("sink"), Pose((0, 0), 6), 0)
        rec = run_episode(scene, Policy("random"), spec, EpisodeConfig(success_radius_m=0.1))
        for cell in replay(scene, spec.start, rec.actions):
            assert scene.is_free(cell)

    def test_blocked_move_costs_a_step(self):
        scene = build_scene(["000000"], ["hallway"], [("plant", (0, 5))])
        spec = EpisodeSpec("b", scene.id, SP.object_index("plant"), Pose((0, 0), 6), 0)
        agent = navigator._Agent(scene, spec, EpisodeConfig())
        agent.act("forward")
        assert agent.pose.cell == (0, 0) and agent.steps == 1 and agent.translations == 0
        agent.act("backward")
        assert agent.pose.cell == (0, 1) and agent.translations == 1


class TestRunEpisode:
    def srg_policy(self, scene, vectors):
        return Policy("srg_gcn", build_srg([extract_scene_graph(scene)], SP), table_from(vectors))

    def test_start_at_goal(self, corridor_scene):
        spec = EpisodeSpec("g", "corridor", SP.object_index("bed"), Pose((2, 14)), 0)
        for kind in ("random", "greedy_unexplored"):
            rec = run_episode(corridor_scene, Policy(kind), spec)
            assert rec.success and rec.steps == 0 and rec.path_m == 0.0
            assert rec.shortest_m == pytest.approx(0.3)

    def test_ideal_assets_follow_valid_trajectory(self, corridor_scene):
        e = np.eye(4)
        policy = self.srg_policy(corridor_scene, {
            "bed": e[0], "bedroom": e[0], "hallway": 0.8 * e[0] + 0.6 * e[1], "living room": e[2]})
        start = Pose((0, 0), 0)
        assert not line_of_sight(corridor_scene, start.cell, (2, 15))
        spec = EpisodeSpec("i", "corridor", SP.object_index("bed"), start, 0)
        rec = run_episode(corridor_scene, policy, spec)
        traj = generate_valid_trajectory(corridor_scene, start, SP.object_index("bed"))
        assert rec.success
        assert tuple(rec.regions_visited) == traj.regions

    def test_records_satisfy_invariants(self, tiny_scenes):
        scene = tiny_scenes[0]
        srg = build_srg([extract_scene_graph(s) for s in tiny_scenes], scene.space)
        rng = np.random.default_rng(0)
        table = EmbeddingTable(scene.space.node_names, rng.normal(size=(scene.space.n_nodes, 8)))
        cfg = EpisodeConfig(max_steps=120)
        for kind in ("random", "greedy_unexplored", "srg_gcn"):
            policy = Policy(kind, srg, table) if kind == "srg_gcn" else Policy(kind)
            for spec in sample_episodes(scene, 8, 1, cfg):
                rec = run_episode(scene, policy, spec, cfg)
                assert rec.steps <= cfg.max_steps == 120
                assert len(rec.actions) == rec.steps
                cells = replay(scene, spec.start, rec.actions)
                moves = sum(a != b for a, b in zip(cells, cells[1:]))
                assert rec.path_m == pytest.approx(0.3 * moves, abs=1e-12)
                targets = [o.cell for o in scene.objects_of(spec.target)]
                euclid = min(scene.euclidean_m(cells[-1], t) for t in targets)
                assert rec.terminal_euclid_m == pytest.approx(euclid)
                assert rec.success == (euclid <= 1.0 + 1e-9)
                assert rec.shortest_m > 0 and rec.path_m >= 0

    def test_srg_decisions_are_logged(self, tiny_scenes):
        scene = tiny_scenes[1]
        srg = build_srg([extract_scene_graph(s) for s in tiny_scenes], scene.space)
        table = EmbeddingTable(scene.space.node_names, np.random.default_rng(1).normal(size=(12, 8)))
        for spec in sample_episodes(scene, 6, 2):
            rec = run_episode(scene, Policy("srg_gcn", srg, table), spec)
            for dec in rec.decisions:
                assert dec["kind"] in ("region", "explore", "exhausted")
                for est in dec["region_estimates"]:
                    assert est["candidate_objects"] and set(est["scores"]) == set(scene.space.regions)
                if dec["kind"] == "region":
                    assert dec["chosen_region"] in dec["similarities"]

    def test_planner_failure_is_flagged(self, corridor_scene, monkeypatch):
        def fail(*args, **kwargs):
            raise NoPathError("forced")
        monkeypatch.setattr(navigator, "path_to_nearest", fail)
        spec = EpisodeSpec("p", "corridor", SP.object_index("bed"), Pose((2, 0)), 0)
        rec = run_episode(corridor_scene, Policy("greedy_unexplored"), spec)
        assert rec.termination == "planner_failure" and not rec.success

    def test_scene_mismatch(self, corridor_scene):
        with pytest.raises(ValueError):
            run_episode(corridor_scene, Policy("random"), EpisodeSpec("x", "other", 0, Pose((0, 0)), 0))

    def test_deterministic(self, tiny_scenes):
        scene = tiny_scenes[2]
        for spec in sample_episodes(scene, 4, 3):
            a = run_episode(scene, Policy("random"), spec)
            b = run_episode(scene, Policy("random"), spec)
            assert a.to_dict() == b.to_dict()


class TestGreedy:
    def test_visits_cells_in_distance_order(self):
        rows = ["0000000", "######0", "######0"]
        scene = build_scene(rows, ["hallway"], [("plant", (2, 6))])
        spec = EpisodeSpec("l", scene.id, SP.object_index("plant"), Pose((0, 0)), 0)
        rec = run_episode(scene, Policy("greedy_unexplored"), spec, EpisodeConfig(success_radius_m=0.1))
        assert rec.success
        cells = replay(scene, spec.start, rec.actions)
        first = list(dict.fromkeys(cells))
        assert first == [(0, c) for c in range(7)] + [(1, 6), (2, 6)]

    def test_exhausts_disconnected_scene(self):
        rows = ["000#11111", "000#11111"]
        scene = build_scene(rows, ["kitchen", "bedroom"], [("sink", (0, 0)), ("bed", (1, 8))])
        spec = EpisodeSpec("x", scene.id, SP.object_index("bed"), Pose((0, 0)), 0)
        agent = navigator._Agent(scene, spec, EpisodeConfig(max_steps=10_000))
        assert navigator._run_greedy(agent) == "exhausted"
        seen = set(replay(scene, spec.start, "".join(agent.actions)))
        assert seen == {(r, c) for r in range(2) for c in range(3)}

    def test_sees_every_object_given_budget(self):
        scene = generate_scene(tiny_config(), 55)
        far = max(scene.objects, key=lambda o: o.id)
        # no goal is reachable or visible, so greedy explores until the frontier is exhausted
        spec = EpisodeSpec("v", scene.id, far.category, Pose(scene.free_cells()[0]), 0)
        agent = navigator._Agent(scene, spec, EpisodeConfig(max_steps=100_000))
        agent.targets = []
        agent.target_cells = [(-100, -100)]
        navigator._run_greedy(agent)
        cells = set(replay(scene, spec.start, "".join(agent.actions)))
        for obj in scene.objects:
            assert any(scene.euclidean_m(c, obj.cell) <= 10.0 and line_of_sight(scene, c, obj.cell) for c in cells)


class TestSampling:
    def test_deterministic_and_hashable(self, tiny_scenes):
        a = sample_episodes(tiny_scenes[0], 10, [5, 0])
        b = sample_episodes(tiny_scenes[0], 10, [5, 0])
        assert a == b and specs_hash(a) == specs_hash(b)
        assert specs_hash(a) != specs_hash(sample_episodes(tiny_scenes[0], 10, [5, 1]))

    def test_start_rules(self, tiny_scenes):
        for scene in tiny_scenes:
            for spec in sample_episodes(scene, 10, 0):
                tcells = [o.cell for o in scene.objects_of(spec.target)]
                assert min(scene.euclidean_m(spec.start.cell, t) for t in tcells) > 1.0
                assert scene.is_free(spec.start.cell)

    def test_scene_without_objects(self):
        scene = build_scene(["000"], ["kitchen"], [])
        with pytest.raises(ValueError):
            sample_episodes(scene, 1, 0)


class TestConfig:
    def test_defaults(self):
        cfg = EpisodeConfig()
        assert (cfg.max_steps, cfg.success_radius_m, cfg.sense_radius_m, cfg.k) == (350, 1.0, 10.0, 4)
        assert (cfg.step_translation_m, cfg.step_rotation_deg) == (0.3, 30.0)

    @pytest.mark.parametrize("field", ["max_steps", "success_radius_m", "sense_radius_m", "step_translation_m"])
    def test_positive(self, field):
        with pytest.raises(ValueError):
            EpisodeConfig(**{field: 0})

    def test_rotation_must_match_pose_model(self):
        with pytest.raises(ValueError):
            EpisodeConfig(step_rotation_deg=45.0)

    def test_policy_assets(self):
        with pytest.raises(ValueError):
            Policy("srg_gcn")
        with pytest.raises(ValueError):
            Policy("frontier")
        assert Policy("random").srg is None
