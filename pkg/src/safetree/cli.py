"""Command-line pipeline: ingest -> fit -> extract -> train -> prune -> eval -> render.

All commands are driven by a single JSON run configuration plus a seed, and
every command writes the fully-resolved configuration next to its outputs so
runs can be reproduced from the artifacts alone.

Exit codes: 0 success, 1 input/parse errors, 2 domain/config errors,
3 training divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import crl, features, formula as formula_mod, navenv, octree
from .errors import DomainError, InputError, TrainingDiverged

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DOMAIN = 2
EXIT_DIVERGED = 3


@dataclasses.dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    feature_map: str = "identity_xy"
    expert_trajectories: int = 125
    expert_noise: float = 0.05
    tree: octree.TreeConfig = dataclasses.field(
        default_factory=lambda: octree.TreeConfig(max_depth=2)
    )
    train: crl.TrainConfig = dataclasses.field(default_factory=crl.TrainConfig)
    env: navenv.NavConfig = dataclasses.field(default_factory=navenv.NavConfig)
    prune_threshold: float = 0.001
    eval_episodes: int = 100

    def resolved(self) -> dict:
        doc = dataclasses.asdict(self)
        for key in ("start", "goal", "obstacle_x", "obstacle_y"):
            doc["env"][key] = list(doc["env"][key])
        return doc


def _apply_section(cls, defaults, overrides: dict, section: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise DomainError(f"unknown {section} config keys: {sorted(unknown)}")
    merged = {**dataclasses.asdict(defaults), **overrides}
    for key in ("start", "goal", "obstacle_x", "obstacle_y"):
        if key in merged and isinstance(merged[key], list):
            merged[key] = tuple(merged[key])
    return cls(**merged)


def load_run_config(path=None, seed=None) -> RunConfig:
    """Read a RunConfig JSON document; unknown keys are rejected."""
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path}: invalid JSON ({exc.msg})") from exc
        except OSError as exc:
            raise InputError(f"config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise InputError(f"config {path}: expected a JSON object")
    base = RunConfig()
    top_known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(doc) - top_known
    if unknown:
        raise DomainError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key in ("feature_map", "expert_trajectories", "expert_noise",
                "prune_threshold", "eval_episodes", "seed"):
        if key in doc:
            kwargs[key] = doc[key]
    kwargs["tree"] = _apply_section(octree.TreeConfig, base.tree, doc.get("tree", {}), "tree")
    kwargs["train"] = _apply_section(crl.TrainConfig, base.train, doc.get("train", {}), "train")
    kwargs["env"] = _apply_section(navenv.NavConfig, base.env, doc.get("env", {}), "env")
    cfg = RunConfig(**kwargs)
    if seed is not None:
        cfg = dataclasses.replace(
            cfg,
            seed=seed,
            train=dataclasses.replace(cfg.train, seed=seed),
        )
    else:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, seed=cfg.seed))
    return cfg


def _write_resolved_config(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_config.json").write_text(
        json.dumps(cfg.resolved(), sort_keys=True, indent=1) + "\n"
    )


def _load_dataset(path: Path) -> features.Dataset:
    if path.suffix == ".csv":
        return features.load_dataset_csv(path)
    trajs = features.load_trajectories(path, "jsonl")
    return features.build_dataset(trajs)


# --- commands ----------------------------------------------------------------

def cmd_ingest(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out)
    _write_resolved_config(cfg, out_dir)
    if args.generate:
        trajs = navenv.generate_expert(
            cfg.expert_trajectories, noise=cfg.expert_noise, seed=cfg.seed
        )
        features.save_trajectories(trajs, out_dir / "expert.jsonl")
    else:
        if not args.trajectories:
            raise InputError("ingest needs --trajectories or --generate")
        trajs = features.load_trajectories(args.trajectories, "jsonl")
    ds = features.build_dataset(trajs, cfg.feature_map)
    features.save_dataset_csv(ds, out_dir / "dataset.csv")
    print(f"ingested {len(trajs)} trajectories, {ds.size} points, k={ds.dim}")
    return EXIT_OK


def cmd_fit(args, cfg: RunConfig) -> int:
    trajs = features.load_trajectories(args.trajectories, "jsonl")
    ds = features.build_dataset(trajs, cfg.feature_map)
    tree = octree.build_tree(ds, cfg.tree)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(octree.tree_to_json(tree) + "\n")
    _write_resolved_config(cfg, out.parent)
    boxes = octree.leaf_boxes(tree)
    print(f"fitted tree with {len(boxes)} leaf boxes over {ds.size} points")
    for lo, hi in boxes:
        lo_txt = ", ".join(f"{v:.4f}" for v in lo)
        hi_txt = ", ".join(f"{v:.4f}" for v in hi)
        print(f"  box [{lo_txt}] .. [{hi_txt}]")
    return EXIT_OK


def cmd_extract(args, cfg: RunConfig) -> int:
    tree = octree.tree_from_json(Path(args.tree).read_text())
    ds = _load_dataset(Path(args.dataset))
    bounds = features.feature_bounds(ds)
    formula = formula_mod.extract_formula(tree, bounds)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(formula_mod.formula_to_json(formula) + "\n")
    out.with_suffix(".txt").write_text(formula_mod.render_text(formula) + "\n")
    _write_resolved_config(cfg, out.parent)
    print(f"extracted {len(formula)} conjunctions")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    formula = formula_mod.formula_from_json(Path(args.formula).read_text())
    env = navenv.NavEnv(cfg.env)
    policy, curves, stats = crl.train(env, formula, cfg.train)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "curves.csv").write_text(curves.to_csv())
    (out_dir / "stats.csv").write_text(formula_mod.stats_to_csv(formula, stats))
    (out_dir / "policy.json").write_text(policy.to_json() + "\n")
    _write_resolved_config(cfg, out_dir)
    last = curves.rows[-1]
    print(
        f"trained {cfg.train.epochs} epochs: reward={last['mean_reward']:.3f} "
        f"cost={last['mean_formula_cost']:.3f} lambda={last['lambda']:.3f} "
        f"goal_rate={last['goal_rate']:.2f}"
    )
    return EXIT_OK


def cmd_prune(args, cfg: RunConfig) -> int:
    formula = formula_mod.formula_from_json(Path(args.formula).read_text())
    stats = formula_mod.stats_from_csv(Path(args.stats).read_text(), formula)
    threshold = args.threshold if args.threshold is not None else cfg.prune_threshold
    pruned = formula_mod.prune(formula, stats, threshold)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(formula_mod.formula_to_json(pruned) + "\n")
    out.with_suffix(".txt").write_text(formula_mod.render_text(pruned) + "\n")
    _write_resolved_config(cfg, out.parent)
    print(f"pruned {len(formula) - len(pruned)} of {len(formula)} conjunctions")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    policy = crl.Policy.from_json(Path(args.policy).read_text())
    formula = formula_mod.formula_from_json(Path(args.formula).read_text())
    env = navenv.NavEnv(cfg.env)
    mean_r, mean_cf, mean_gt, goal_rate = crl.evaluate_policy(
        env, policy, formula, cfg.eval_episodes, seed=cfg.seed
    )
    metrics = {
        "mean_reward": mean_r,
        "mean_formula_cost": mean_cf,
        "mean_gt_cost": mean_gt,
        "goal_rate": goal_rate,
        "episodes": cfg.eval_episodes,
    }
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(metrics, sort_keys=True, indent=1) + "\n")
        _write_resolved_config(cfg, out.parent)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_render(args, cfg: RunConfig) -> int:
    boxes = []
    if args.tree:
        tree = octree.tree_from_json(Path(args.tree).read_text())
        boxes = octree.leaf_boxes(tree)
    trajs = []
    if args.trajectories:
        trajs = features.load_trajectories(args.trajectories, "jsonl")
    svg = navenv.scene_svg(cfg.env, boxes, trajs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(f"rendered scene with {len(boxes)} boxes and {len(trajs)} trajectories")
    return EXIT_OK


def cmd_pipeline(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_resolved_config(cfg, out_dir)

    trajs = navenv.generate_expert(
        cfg.expert_trajectories, noise=cfg.expert_noise, seed=cfg.seed
    )
    features.save_trajectories(trajs, out_dir / "expert.jsonl")
    ds = features.build_dataset(trajs, cfg.feature_map)
    features.save_dataset_csv(ds, out_dir / "dataset.csv")
    print(f"[1/7] generated {len(trajs)} trajectories ({ds.size} points)")

    tree = octree.build_tree(ds, cfg.tree)
    (out_dir / "tree.json").write_text(octree.tree_to_json(tree) + "\n")
    print(f"[2/7] fitted tree with {len(octree.leaf_boxes(tree))} leaf boxes")

    bounds = features.feature_bounds(ds)
    formula = formula_mod.extract_formula(tree, bounds)
    (out_dir / "formula.json").write_text(formula_mod.formula_to_json(formula) + "\n")
    (out_dir / "formula.txt").write_text(formula_mod.render_text(formula) + "\n")
    print(f"[3/7] extracted {len(formula)} conjunctions")

    env = navenv.NavEnv(cfg.env)
    policy, curves, stats = crl.train(env, formula, cfg.train)
    (out_dir / "curves.csv").write_text(curves.to_csv())
    (out_dir / "stats.csv").write_text(formula_mod.stats_to_csv(formula, stats))
    (out_dir / "policy.json").write_text(policy.to_json() + "\n")
    last = curves.rows[-1]
    print(
        f"[4/7] trained: reward={last['mean_reward']:.2f} "
        f"goal_rate={last['goal_rate']:.2f} lambda={last['lambda']:.2f}"
    )

    pruned = formula_mod.prune(formula, stats, cfg.prune_threshold)
    (out_dir / "pruned.json").write_text(formula_mod.formula_to_json(pruned) + "\n")
    (out_dir / "pruned.txt").write_text(formula_mod.render_text(pruned) + "\n")
    print(f"[5/7] pruned to {len(pruned)} conjunctions: {formula_mod.render_text(pruned)}")

    mean_r, mean_cf, mean_gt, goal_rate = crl.evaluate_policy(
        env, policy, formula, cfg.eval_episodes, seed=cfg.seed
    )
    metrics = {
        "mean_reward": mean_r,
        "mean_formula_cost": mean_cf,
        "mean_gt_cost": mean_gt,
        "goal_rate": goal_rate,
        "episodes": cfg.eval_episodes,
    }
    (out_dir / "metrics.json").write_text(json.dumps(metrics, sort_keys=True, indent=1) + "\n")
    print(f"[6/7] evaluated: {json.dumps(metrics, sort_keys=True)}")

    svg = navenv.scene_svg(cfg.env, octree.leaf_boxes(tree), trajs[:3])
    (out_dir / "scene.svg").write_text(svg)
    print("[7/7] rendered scene.svg")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safetree",
        description="Constraint learning from demonstrations: tree, formula, constrained training.",
    )
    parser.add_argument("--config", help="run configuration JSON", default=None)
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="trajectories JSONL -> dataset CSV")
    p.add_argument("--trajectories", help="input trajectories (JSONL)")
    p.add_argument("--generate", action="store_true", help="generate expert demonstrations")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("fit", help="fit the one-class tree")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--depth", type=int, default=None, help="override tree max depth")
    p.add_argument("--out", required=True, help="output tree JSON path")
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("extract", help="extract the constraint formula from a tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--dataset", required=True, help="dataset CSV (or trajectories JSONL)")
    p.add_argument("--out", required=True, help="output formula JSON path")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("train", help="constrained policy optimization")
    p.add_argument("--formula", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("prune", help="drop conjunctions with low violation ratios")
    p.add_argument("--formula", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", required=True, help="output formula JSON path")
    p.set_defaults(fn=cmd_prune)

    p = sub.add_parser("eval", help="greedy evaluation of a trained policy")
    p.add_argument("--policy", required=True)
    p.add_argument("--formula", required=True)
    p.add_argument("--out", default=None, help="optional metrics JSON path")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("render", help="render world/tree/trajectories to SVG")
    p.add_argument("--tree", default=None)
    p.add_argument("--trajectories", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("pipeline", help="run the whole toy pipeline end to end")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_run_config(args.config, args.seed)
        if getattr(args, "depth", None) is not None:
            cfg = dataclasses.replace(
                cfg, tree=dataclasses.replace(cfg.tree, max_depth=args.depth)
            )
        return args.fn(args, cfg)
    except InputError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(
            json.dumps({"error": "FileNotFound", "message": str(exc)}), file=sys.stderr
        )
        return EXIT_INPUT
    except TrainingDiverged as exc:
        print(json.dumps({"error": "TrainingDiverged", "message": str(exc)}), file=sys.stderr)
        return EXIT_DIVERGED
    except DomainError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
