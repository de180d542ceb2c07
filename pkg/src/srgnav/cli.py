"""``srgnav`` command line: generate, trajectories, build-srg, train, evaluate, trace.

Every command works inside a workspace directory holding ``manifest.json``.
Exit codes: 0 success, 2 usage error, 3 missing dependency, 4 category
space hash mismatch, 5 malformed file, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .gcn import TrainConfig, dumps_checkpoint, embed, train
from .graph import build_srg, dumps_srg, export_dot, extract_scene_graph, prune_srg
from .metrics import compare_policies, format_table
from .navigator import EpisodeConfig, Policy
from .trajectories import dumps_corpus, generate_corpus
from .workspace import WorkspaceError, Workspace, load_generator_config
from .world import SceneGenerationError, dumps_scene, generate_scene

log = logging.getLogger("srgnav")

POLICY_FLAGS = {"srg_gcn": "srg_gcn", "random": "random", "greedy": "greedy_unexplored",
                "greedy_unexplored": "greedy_unexplored"}


def cmd_generate(args) -> int:
    if args.scenes < 1 or args.eval_scenes < 0:
        raise WorkspaceError("--scenes must be at least 1 and --eval-scenes non-negative")
    cfg, raw = load_generator_config(args.config)
    ws = Workspace.create(args.workspace, cfg.space, raw, args.seed)
    scenes = {"train": [], "eval": []}
    for split, count, stream in (("train", args.scenes, 0), ("eval", args.eval_scenes, 1)):
        for i in range(count):
            sid = f"{split}-{i:04d}"
            scene = generate_scene(cfg, [args.seed, stream, i], sid)
            scenes[split].append(ws.write(f"scenes/{sid}.json", dumps_scene(scene)))
    ws.manifest.paths = {"scenes": scenes}
    ws.save()
    print(f"wrote {args.scenes} training and {args.eval_scenes} evaluation scenes to {ws.root}")
    return 0


def cmd_trajectories(args) -> int:
    ws = Workspace.open(args.workspace)
    corpus = generate_corpus(ws.load_scenes("train"))
    ws.invalidate("trajectories")
    ws.manifest.paths["corpus"] = ws.write("corpus.jsonl", dumps_corpus(corpus, ws.space))
    ws.save()
    print(f"{len(corpus)} trajectories")
    return 0


def cmd_build_srg(args) -> int:
    ws = Workspace.open(args.workspace)
    graphs = [extract_scene_graph(s) for s in ws.load_scenes("train")]
    full = build_srg(graphs, ws.space)
    pruned = prune_srg(full, args.prune_threshold)
    ws.invalidate("build-srg")
    ws.manifest.paths["srg"] = ws.write("srg.json", dumps_srg(full))
    ws.manifest.paths["srg_pruned"] = ws.write("srg_pruned.json", dumps_srg(pruned))
    ws.manifest.paths["srg_dot"] = ws.write("srg.dot", export_dot(pruned))
    ws.manifest.seeds["prune_threshold"] = args.prune_threshold
    ws.save()
    print(f"SRG from {full.n_graphs} scenes: {len(full.edges())} edges, {len(pruned.edges())} after pruning")
    return 0


def cmd_train(args) -> int:
    ws = Workspace.open(args.workspace)
    pruned = ws.load_srg()
    corpus = ws.load_corpus()
    config = TrainConfig(lr=args.lr, epochs=args.epochs, embed_dim=args.embed_dim, seed=args.seed)
    result = train(pruned, corpus, config, ws.space)
    ws.invalidate("train")
    h = ws.space.hash()
    ws.manifest.paths["checkpoint"] = ws.write("checkpoint.json", dumps_checkpoint(result.model, config, ws.space))
    ws.manifest.paths["embeddings"] = ws.write("embeddings.csv", result.embeddings.to_text(h))
    history = [f"# format_version=1 category_space_hash={h}", "epoch,loss"]
    history += [f"{i},{loss!r}" for i, loss in enumerate(result.loss_history)]
    ws.manifest.paths["loss_history"] = ws.write("loss_history.csv", "\n".join(history) + "\n")
    ws.manifest.seeds["train"] = args.seed
    ws.save()
    print(f"trained on {result.n_pairs} pairs for {len(result.loss_history)} epochs, "
          f"final loss {result.loss_history[-1]:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    ws = Workspace.open(args.workspace)
    kind = POLICY_FLAGS[args.policy]
    if kind == "srg_gcn":
        # dependency checks come before any episode runs
        model, _, _ = ws.load_checkpoint()
        table = embed(model, ws.load_srg("srg_pruned"))
        stored = ws.load_embeddings()
        if not np.array_equal(stored.vectors, table.vectors):
            log.warning("embeddings.csv differs from the checkpoint's embeddings; using the checkpoint")
        # region labelling reads the unpruned counts; pruning only shapes the GCN input
        policy = Policy(kind, ws.load_srg("srg"), table)
    else:
        policy = Policy(kind)
    scenes = ws.load_scenes("eval")
    if not scenes:
        raise WorkspaceError("workspace has no evaluation scenes; rerun 'generate' with --eval-scenes > 0")
    config = EpisodeConfig(max_steps=args.max_steps, k=args.k)
    report, records = compare_policies(scenes, {kind: policy}, args.episodes_per_scene, args.seed,
                                       config, workers=args.workers)[kind]
    h = ws.space.hash()
    doc = dict(report.to_dict(), category_space_hash=h, seed=args.seed)
    log_lines = [json.dumps({"format_version": 1, "category_space_hash": h, "policy": kind})]
    log_lines += [json.dumps(r.to_dict(ws.space)) for r in records]
    ws.manifest.paths.setdefault("reports", {})[kind] = {
        "json": ws.write(f"reports/{kind}.json", json.dumps(doc, indent=1) + "\n"),
        "text": ws.write(f"reports/{kind}.txt", format_table([report])),
        "episodes": ws.write(f"episodes/{kind}.jsonl", "\n".join(log_lines) + "\n"),
    }
    ws.manifest.seeds.setdefault("evaluate", {})[kind] = args.seed
    ws.save()
    sys.stdout.write(format_table([report]))
    return 0


def format_trace(rec: dict) -> str:
    """Human-readable decision trace of one logged episode."""
    out = [f"episode {rec['episode_id']}  policy {rec['policy']}  target {rec['target']}",
           f"start {rec['start']}  result {rec['termination']} after {rec['steps']} steps, "
           f"{rec['path_m']:.1f} m travelled (shortest {rec['shortest_m']:.1f} m)"]
    if not rec["decisions"]:
        out.append("no region decisions were logged")
    for n, dec in enumerate(rec["decisions"], 1):
        out.append(f"\ndecision {n} at step {dec['step']}, pose {dec['pose']}: {dec['kind']}")
        seen = ", ".join(f"{name}#{oid}" for oid, name in dec["visible_objects"]) or "nothing"
        out.append(f"  visible: {seen}")
        for est in dec["region_estimates"]:
            top = sorted(est["scores"].items(), key=lambda kv: -kv[1])[:3]
            scores = ", ".join(f"{r} {p:.3f}" for r, p in top)
            out.append(f"  {est['object']}#{est['object_id']} -> {est['region']} "
                       f"from [{', '.join(est['candidate_objects'])}]  ({scores})")
        if dec["kind"] == "region":
            sims = sorted(dec["similarities"].items(), key=lambda kv: -kv[1])
            out.append("  similarity to target: " + ", ".join(f"{r} {s:.3f}" for r, s in sims))
            out.append(f"  chosen region: {dec['chosen_region']} (room {dec['destination_instance']})")
        elif dec["kind"] == "explore":
            out.append(f"  no unvisited labelled room in view; exploring room {dec['destination_instance']}")
    return "\n".join(out) + "\n"


def cmd_trace(args) -> int:
    ws = Workspace.open(args.workspace)
    for rec in ws.load_episode_log(POLICY_FLAGS[args.policy]):
        if rec["episode_id"] == args.episode_id:
            sys.stdout.write(format_trace(rec))
            return 0
    raise WorkspaceError(f"episode {args.episode_id!r} is not in the {args.policy} log")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", "-w", default=".", help="workspace directory (default: .)")
    common.add_argument("--verbose", "-v", action="store_true")

    parser = argparse.ArgumentParser(prog="srgnav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="generate scenes and start a workspace")
    p.add_argument("config", help="JSON generator config")
    p.add_argument("--scenes", type=int, required=True, help="number of training scenes")
    p.add_argument("--eval-scenes", type=int, default=5, help="number of held-out scenes (default: 5)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("trajectories", parents=[common], help="extract the valid-trajectory corpus")
    p.set_defaults(func=cmd_trajectories)

    p = sub.add_parser("build-srg", parents=[common], help="count and prune the relational graph")
    p.add_argument("--prune-threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_build_srg)

    p = sub.add_parser("train", parents=[common], help="train node embeddings")
    p.add_argument("--lr", type=float, default=0.0003)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--embed-dim", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="run episodes on the held-out scenes")
    p.add_argument("--policy", choices=sorted(POLICY_FLAGS), default="srg_gcn")
    p.add_argument("--episodes-per-scene", type=int, default=10)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--max-steps", type=int, default=350)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1, help="parallel processes (default: 1)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("trace", parents=[common], help="print the decision trace of one episode")
    p.add_argument("episode_id")
    p.add_argument("--policy", choices=sorted(POLICY_FLAGS), default="srg_gcn")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except WorkspaceError as e:
        print(f"srgnav {args.command}: error: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, SceneGenerationError, FloatingPointError) as e:
        print(f"srgnav {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
