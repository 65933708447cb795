"""Command line: train, eval, replay, transfer, sweep, stats."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from hideseek.config import INTRINSIC_CHOICES, TrainConfig, load_config


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


def cmd_train(args) -> int:
    from hideseek.rollout.train import run_training
    from hideseek.evalkit.stats import run_stats
    cfg = load_config(args.config) if args.config else TrainConfig()
    over = {}
    if args.workers is not None:
        over["workers"] = args.workers
    if args.intrinsic is not None:
        over["intrinsic"] = args.intrinsic
    if args.seed is not None:
        over["seed"] = args.seed
    cfg = cfg.replace(**over)

    def progress(rec):
        if not args.quiet:
            print(f"iter {rec['iteration']:5d} steps {rec['env_steps']:8d} "
                  f"return {rec.get('ep_return_mean')} phase {rec['phase']}", flush=True)

    run_training(cfg, args.out, args.steps, mode=args.mode, on_step=progress)
    _print(run_stats(args.out))
    return 0


def _controller_factory(checkpoint: Optional[str], greedy: bool):
    from hideseek.evalkit.controllers import PolicyController, RandomController
    if checkpoint is None:
        return lambda s: RandomController(s)
    from hideseek.ppo.learner import load_networks
    learner, _ = load_networks(checkpoint)
    return lambda s: PolicyController.from_learner(learner, s, greedy)


def cmd_eval(args) -> int:
    from hideseek.envs import EnvConfig
    from hideseek.evalkit.evaluate import evaluate, summarize
    from hideseek.evalkit.rundir import write_ndjson
    from hideseek.evalkit.trace import record_episode
    env = EnvConfig.preset(args.variant)
    factory = _controller_factory(None if args.random else args.checkpoint, args.greedy)
    seeds = [args.seed + k for k in range(args.episodes)]
    recs = evaluate(env, factory, seeds)
    out = {"variant": args.variant, "episodes": len(recs),
           "policy": "random" if args.random else args.checkpoint}
    for key in ("return_mean", "hider_return", "seeker_return"):
        vals = [r[key] for r in recs if r[key] is not None]
        if vals:
            out[key] = summarize(recs, key)
    if args.out:
        write_ndjson(args.out, recs)
    if args.traces:
        d = Path(args.traces)
        d.mkdir(parents=True, exist_ok=True)
        for s in seeds:
            record_episode(env, s, factory(s)).save(d / f"{args.variant}_{s}.trace.ndjson")
        out["traces"] = str(d)
    _print(out)
    return 0


def cmd_replay(args) -> int:
    from hideseek.evalkit.trace import (ReplayMismatch, TraceError, TrajectoryRecord, digest,
                                        replay, write_positions)
    try:
        rec = TrajectoryRecord.load(args.trace)
        res = replay(rec)
    except (TraceError, ReplayMismatch) as e:
        print(f"replay failed: {e}", file=sys.stderr)
        return 2
    if args.positions:
        write_positions(res, args.positions)
    _print({"trace": args.trace, "variant": rec.env.variant, "seed": rec.seed,
            "steps": len(rec.actions), "final_digest": digest(res.final_state),
            "bitwise_match": True})
    return 0


BASELINE_INTRINSIC = {"count": "count-box2d", "rnd": "rnd"}


def cmd_transfer(args) -> int:
    from hideseek.evalkit.transfer import compare_transfer, default_seeds
    seeds = args.seeds if args.seeds else default_seeds(args.task)
    out = Path(args.out)
    modes: List[str] = ["hns"]
    checkpoints = {"hns": args.checkpoint}
    if args.baseline == "random":
        modes.append("random")
    elif args.baseline in BASELINE_INTRINSIC:
        ck = args.baseline_checkpoint or _pretrain_intrinsic(args, out)
        modes.append("intrinsic")
        checkpoints["intrinsic"] = ck
    base = load_config(args.config) if args.config else TrainConfig()
    runs = compare_transfer(args.task, modes, seeds, out, checkpoints, iterations=args.iterations,
                            base=base)
    _print({m: r.as_record() for m, r in runs.items()})
    return 0


def _pretrain_intrinsic(args, out: Path) -> str:
    """Intrinsic-only pretraining in the quarter arena, with the checkpoint's architecture."""
    from hideseek.evalkit.rundir import RunDir
    from hideseek.evalkit.transfer import checkpoint_policy_config
    from hideseek.explore.harness import quarter_arena
    from hideseek.rollout.train import run_training
    base = load_config(args.config) if args.config else TrainConfig()
    cfg = base.replace(env=quarter_arena(), policy=checkpoint_policy_config(args.checkpoint),
                       intrinsic=args.intrinsic or BASELINE_INTRINSIC[args.baseline],
                       intrinsic_only=True)
    root = out / f"pretrain_{cfg.intrinsic}"
    run_training(cfg, root, args.pretrain_steps)
    return str(RunDir(root).latest_checkpoint())


def cmd_sweep(args) -> int:
    from hideseek.envs import EnvConfig
    from hideseek.evalkit.evaluate import zero_shot_sweep
    factory = _controller_factory(None if args.random else args.checkpoint, args.greedy)
    seeds = [args.seed + k for k in range(args.episodes)]
    _print(zero_shot_sweep(EnvConfig.preset(args.variant), factory, args.axis, args.values, seeds))
    return 0


def cmd_stats(args) -> int:
    from hideseek.evalkit.stats import run_stats
    _print(run_stats(args.run))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hideseek", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    t = sub.add_parser("train", help="self-play PPO training")
    t.add_argument("--config", help="flat key = value file")
    t.add_argument("--workers", type=int)
    t.add_argument("--steps", type=int, required=True, help="learner iterations")
    t.add_argument("--out", required=True, help="run directory")
    t.add_argument("--intrinsic", choices=INTRINSIC_CHOICES)
    t.add_argument("--seed", type=int)
    t.add_argument("--mode", choices=("single", "multi"), default="single")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluation episodes of a checkpoint")
    e.add_argument("--checkpoint")
    e.add_argument("--episodes", type=int, default=20)
    e.add_argument("--variant", default="hide_and_seek")
    e.add_argument("--seed", type=int, default=10_000)
    e.add_argument("--random", action="store_true", help="uniform random actions instead")
    e.add_argument("--greedy", action="store_true")
    e.add_argument("--out", help="per-episode ndjson")
    e.add_argument("--traces", help="directory for episode traces")
    e.set_defaults(fn=cmd_eval)

    r = sub.add_parser("replay", help="re-simulate a trace and check every state")
    r.add_argument("--trace", required=True)
    r.add_argument("--positions", help="write per-step positions as ndjson")
    r.set_defaults(fn=cmd_replay)

    x = sub.add_parser("transfer", help="fine-tune on a transfer task against a baseline")
    x.add_argument("--task", required=True)
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--baseline", choices=("random", "count", "rnd"), default="random")
    x.add_argument("--baseline-checkpoint")
    x.add_argument("--intrinsic", choices=INTRINSIC_CHOICES[1:],
                   help="intrinsic reward for baseline pretraining")
    x.add_argument("--pretrain-steps", type=int, default=50)
    x.add_argument("--iterations", type=int, default=50)
    x.add_argument("--seeds", type=int, nargs="*")
    x.add_argument("--config")
    x.add_argument("--out", default="runs/transfer")
    x.set_defaults(fn=cmd_transfer)

    w = sub.add_parser("sweep", help="zero-shot sweep over entity counts")
    w.add_argument("--checkpoint")
    w.add_argument("--random", action="store_true")
    w.add_argument("--greedy", action="store_true")
    w.add_argument("--variant", default="hide_and_seek")
    w.add_argument("--axis", choices=("hiders", "ramps", "boxes"), required=True)
    w.add_argument("--values", type=int, nargs="+", required=True)
    w.add_argument("--episodes", type=int, default=20)
    w.add_argument("--seed", type=int, default=20_000)
    w.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("stats", help="aggregate a run directory")
    s.add_argument("--run", required=True)
    s.set_defaults(fn=cmd_stats)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "checkpoint", None) is None and args.cmd in ("eval", "sweep") \
            and not args.random:
        print("either --checkpoint or --random is required", file=sys.stderr)
        return 2
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
