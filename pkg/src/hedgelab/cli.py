"""Command line interface.

Subcommands: simulate, train, evaluate, sweep, validate-optimizer, defaults.
Every run writes a manifest.json capturing the full configuration, its
hash, the seeds, and the produced files. Exit status is nonzero when any
validation fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from .config import (
    RunManifest,
    apply_overrides,
    config_hash,
    default_env_config,
    default_train_config,
    format_config,
    load_config,
    write_manifest,
)
from .env import VegaHedgeEnv
from .evaluate import evaluate, sweep, write_episodes_csv, write_summary_csv
from .market import draw_shocks, dump_paths_csv, simulate
from .optimizer import (
    nag_bound_check,
    next_momentum,
    optimal_majorizer_step,
    majorizer_value,
    random_psd_problem,
    verify_majorizer,
)
from .train import train


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="flat key=value config file (defaults otherwise)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override env.seed")
    parser.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a single config key (repeatable)")


def _load(args) -> tuple:
    env_cfg, train_cfg = load_config(args.config)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if overrides:
        env_cfg, train_cfg = apply_overrides(env_cfg, train_cfg, overrides)
    if args.seed is not None:
        env_cfg = dataclasses.replace(env_cfg, seed=args.seed)
    return env_cfg, train_cfg


def _cmd_defaults(args) -> int:
    print(format_config(default_env_config(), default_train_config()), end="")
    return 0


def _cmd_simulate(args) -> int:
    env_cfg, train_cfg = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest.start("simulate", env_cfg, train_cfg, [env_cfg.seed])
    shocks = draw_shocks(args.paths, args.steps, env_cfg.seed)
    paths = simulate(env_cfg.sabr, shocks)
    out_csv = args.out / "paths.csv"
    dump_paths_csv(paths, out_csv)
    write_manifest(manifest.finish([out_csv]), args.out / "manifest.json")
    print(f"wrote {out_csv} ({args.paths} paths x {args.steps} steps)")
    return 0


def _cmd_train(args) -> int:
    env_cfg, train_cfg = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    seed = env_cfg.seed
    manifest = RunManifest.start("train", env_cfg, train_cfg, [seed])
    result = train(env_cfg, train_cfg, seed=seed, out_dir=args.out)
    outputs = [args.out / "checkpoint.json", args.out / "training_log.csv"]
    write_manifest(manifest.finish(outputs), args.out / "manifest.json")
    print(f"trained {result.iterations} iterations over {result.episodes} episodes "
          f"in {result.wall_time:.1f}s -> {outputs[0]}")
    return 0


def _cmd_evaluate(args) -> int:
    env_cfg, train_cfg = _load(args)
    if (args.strategy is None) == (args.checkpoint is None):
        raise SystemExit("specify exactly one of --strategy or --checkpoint")
    if args.checkpoint is not None and not Path(args.checkpoint).exists():
        raise SystemExit(f"checkpoint not found: {args.checkpoint}")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [env_cfg.seed]
    args.out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest.start("evaluate", env_cfg, train_cfg, seeds)
    summary_rows, episode_rows = evaluate(
        env_cfg, train_cfg, args.episodes, seeds,
        strategy=args.strategy, checkpoint=args.checkpoint,
        per_step=args.per_step,
        ledger_dir=args.out if args.ledger else None,
    )
    summary_csv = args.out / "summary.csv"
    episodes_csv = args.out / "episodes.csv"
    write_summary_csv(summary_rows, summary_csv)
    write_episodes_csv(episode_rows, episodes_csv)
    write_manifest(manifest.finish([summary_csv, episodes_csv]),
                   args.out / "manifest.json")
    for row in summary_rows:
        print(f"{row['strategy']} seed={row['seed']}: mean_std={row['mean_std']:.4f} "
              f"var95={row['var95']:.4f} cvar95={row['cvar95']:.4f}")
    return 0


def _cmd_sweep(args) -> int:
    env_cfg, train_cfg = _load(args)
    grid: dict[str, list[str]] = {}
    for item in args.grid:
        if "=" not in item:
            raise SystemExit(f"--grid expects KEY=V1,V2,..., got {item!r}")
        key, values = item.split("=", 1)
        grid[key.strip()] = [v.strip() for v in values.split(",") if v.strip()]
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    checkpoints = {}
    if args.checkpoint is not None:
        checkpoints["learned"] = str(args.checkpoint)
    seeds = [int(s) for s in args.seeds.split(",")]
    args.out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest.start("sweep", env_cfg, train_cfg, seeds)
    rows, cells, errors = sweep(env_cfg, train_cfg, grid, strategies, seeds,
                                args.episodes, checkpoints=checkpoints)
    summary_csv = args.out / "summary.csv"
    write_summary_csv(rows, summary_csv)
    manifest.finish([summary_csv])
    manifest_dict_path = args.out / "manifest.json"
    write_manifest(manifest, manifest_dict_path)
    import json

    (args.out / "cells.json").write_text(
        json.dumps({"cells": cells, "errors": errors}, indent=2) + "\n"
    )
    print(f"wrote {len(rows)} summary rows over {len(cells)} cells "
          f"({len(errors)} errors) -> {summary_csv}")
    return 1 if errors else 0


def _cmd_validate_optimizer(args) -> int:
    rng = np.random.default_rng(0)
    failures = 0

    t0 = time.time()
    t = 1.0
    ok = True
    for r in range(1, 10_001):
        if t < (r + 1) / 2 - 1e-12:
            ok = False
            break
        t = next_momentum(t)
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] momentum schedule t_r >= (r+1)/2 up to r=1e4 "
          f"({time.time() - t0:.2f}s)")

    t0 = time.time()
    ok = True
    for _ in range(1000):
        dim = int(rng.integers(1, 21))
        problem = random_psd_problem(dim, rng)
        y = rng.standard_normal(dim) * 2
        theta = rng.standard_normal(dim) * 2
        ok &= verify_majorizer(problem, y, theta)
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] quadratic upper bound on 1000 random triples "
          f"({time.time() - t0:.2f}s)")

    t0 = time.time()
    ok = True
    for _ in range(50):
        dim = int(rng.integers(1, 8))
        problem = random_psd_problem(dim, rng, lmax=float(rng.uniform(0.5, 5)))
        y = rng.standard_normal(dim)
        star = optimal_majorizer_step(problem, y)
        base = majorizer_value(problem, y, star)
        for axis in range(dim):
            for sign in (-1.0, 1.0):
                probe = star.copy()
                probe[axis] += sign * 1e-3
                ok &= majorizer_value(problem, y, probe) > base
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] closed-form step minimizes the bound "
          f"({time.time() - t0:.2f}s)")

    t0 = time.time()
    ok = bool(nag_bound_check(
        dataclasses.replace(random_psd_problem(1, rng), matrix=np.array([[4.0]]),
                            offset=np.zeros(1), optimum=np.zeros(1), lmax=4.0),
        np.array([1.0]), 100,
    ).all())
    for _ in range(10):
        dim = int(rng.integers(1, 21))
        problem = random_psd_problem(dim, rng)
        ok &= bool(nag_bound_check(problem, rng.standard_normal(dim) * 2, 500).all())
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] O(1/r^2) suboptimality bound, r<=500 "
          f"({time.time() - t0:.2f}s)")

    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hedgelab",
        description="vega-hedging laboratory: simulate, train, evaluate, sweep",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("defaults", help="print the reference config with all defaults")
    p.set_defaults(func=_cmd_defaults)

    p = sub.add_parser("simulate", help="simulate market paths to CSV")
    _add_common(p)
    p.add_argument("--paths", type=int, default=100)
    p.add_argument("--steps", type=int, default=30)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train the hedging agent")
    _add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a strategy or checkpoint")
    _add_common(p)
    p.add_argument("--strategy", choices=["delta", "delta_vega"], default=None)
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--seeds", type=str, default=None,
                   help="comma-separated evaluation seeds (default: env.seed)")
    p.add_argument("--ledger", action="store_true",
                   help="write the per-step ledger of episode 0")
    p.add_argument("--per-step", action="store_true", dest="per_step",
                   help="compute metrics over per-step losses")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate strategies over a config grid")
    _add_common(p)
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2",
                   help="grid dimension (repeatable)")
    p.add_argument("--strategies", type=str, default="delta,delta_vega")
    p.add_argument("--checkpoint", type=Path, default=None,
                   help="checkpoint for the 'learned' strategy")
    p.add_argument("--seeds", type=str, default="0,1,2")
    p.add_argument("--episodes", type=int, default=500)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate-optimizer", help="run the optimizer validation suites")
    p.set_defaults(func=_cmd_validate_optimizer)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
