"""Evaluation rollouts, summary/episode CSV output, and parameter sweeps.

Evaluation is deterministic: policies run with zero exploration noise, and
episode indices plus the environment seed fully determine every path. Each
summary row carries the config hash of the exact configuration that
produced it.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import STRATEGIES
from .config import TrainConfig, apply_overrides, config_hash
from .distrl import actor_forward
from .env import EnvConfig, VegaHedgeEnv
from .metrics import MEAN_STD_C, SUMMARY_COLUMNS, MetricsSummary, mean_std, summarize
from .nets import MlpParams
from .portfolio import write_ledger_csv
from .train import load_checkpoint

__all__ = [
    "EpisodeBatch",
    "make_policy",
    "run_episodes",
    "evaluate",
    "sweep",
    "write_summary_csv",
    "write_episodes_csv",
    "EPISODE_COLUMNS",
]

EPISODE_COLUMNS = ("strategy", "config_id", "seed", "episode", "pnl", "cost", "premium")


@dataclass
class EpisodeBatch:
    """Per-episode results of one evaluation run."""

    pnl: np.ndarray
    cost: np.ndarray
    premium: np.ndarray
    step_pnls: list[np.ndarray] = field(default_factory=list)


def make_policy(strategy: str | None = None, checkpoint: str | Path | None = None,
                actor: MlpParams | None = None):
    """Resolve a policy callable obs -> action and its label.

    Exactly one of strategy ('delta', 'delta_vega'), checkpoint path, or
    actor parameters must be given; checkpoints and actors evaluate the
    learned policy deterministically.
    """
    given = sum(x is not None for x in (strategy, checkpoint, actor))
    if given != 1:
        raise ValueError("specify exactly one of strategy, checkpoint, or actor")
    if strategy is not None:
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; have {sorted(STRATEGIES)}")
        return STRATEGIES[strategy], strategy
    if checkpoint is not None:
        actor = load_checkpoint(checkpoint)["actor"]
    return (lambda obs: actor_forward(actor, obs)), "learned"


def run_episodes(env_cfg: EnvConfig, policy, n_episodes: int,
                 collect_steps: bool = False,
                 ledger_path: str | Path | None = None) -> EpisodeBatch:
    """Deterministic rollouts of `policy` over episodes 0..n_episodes-1."""
    env = VegaHedgeEnv(env_cfg)
    pnls, costs, premiums, step_pnls = [], [], [], []
    for episode in range(n_episodes):
        obs = env.reset(episode)
        ep_cost = ep_premium = 0.0
        steps = []
        while not env.done:
            res = env.step(policy(obs))
            obs = res.next_obs
            ep_cost += res.info["cost"]
            ep_premium += res.info["premium"]
            if collect_steps:
                steps.append(res.info["pnl"] - res.info["cost"])
        pnls.append(env.snapshot.value)  # initial value is 0
        costs.append(ep_cost)
        premiums.append(ep_premium)
        if collect_steps:
            step_pnls.append(np.array(steps))
        if ledger_path is not None and episode == 0:
            write_ledger_csv(env.ledger_rows, ledger_path)
    return EpisodeBatch(pnl=np.array(pnls), cost=np.array(costs),
                        premium=np.array(premiums), step_pnls=step_pnls)


def evaluate(env_cfg: EnvConfig, train_cfg: TrainConfig, n_episodes: int,
             seeds, strategy: str | None = None,
             checkpoint: str | Path | None = None, actor: MlpParams | None = None,
             per_step: bool = False, ledger_dir: str | Path | None = None,
             mean_std_c: float = MEAN_STD_C) -> tuple[list[dict], list[dict]]:
    """Evaluate one policy across seeds; returns (summary rows, episode rows)."""
    policy, label = make_policy(strategy=strategy, checkpoint=checkpoint, actor=actor)
    cfg_id = config_hash(env_cfg, train_cfg)
    summary_rows, episode_rows = [], []
    for seed in seeds:
        seeded_cfg = dataclasses.replace(env_cfg, seed=int(seed))
        ledger_path = (
            Path(ledger_dir) / f"ledger_{label}_seed{seed}.csv"
            if ledger_dir is not None else None
        )
        batch = run_episodes(seeded_cfg, policy, n_episodes,
                             collect_steps=per_step, ledger_path=ledger_path)
        if per_step:
            losses = -np.concatenate(batch.step_pnls)
        else:
            losses = -batch.pnl
        summary = summarize(-losses, batch.cost, env_cfg.cost_ratio,
                            env_cfg.premium_option_value, env_cfg.episode_days,
                            env_cfg.arrival_intensity, c=mean_std_c)
        summary_rows.append({
            "strategy": label,
            "config_id": cfg_id,
            "mean_std": summary.mean_std,
            "var95": summary.var95,
            "cvar95": summary.cvar95,
            "mean_cost": summary.mean_cost,
            "premium_income": summary.premium_income,
            "n_episodes": summary.n_episodes,
            "seed": int(seed),
        })
        for episode in range(n_episodes):
            episode_rows.append({
                "strategy": label,
                "config_id": cfg_id,
                "seed": int(seed),
                "episode": episode,
                "pnl": float(batch.pnl[episode]),
                "cost": float(batch.cost[episode]),
                "premium": float(batch.premium[episode]),
            })
    return summary_rows, episode_rows


def sweep(env_cfg: EnvConfig, train_cfg: TrainConfig, grid: dict[str, list[str]],
          strategies, seeds, n_episodes: int,
          checkpoints: dict[str, str] | None = None,
          mean_std_c: float = MEAN_STD_C):
    """Cross product of grid values x strategies x seeds.

    grid maps dotted config keys to lists of raw string values. Returns
    (summary rows, cell descriptions, error records); a failing cell is
    recorded and the sweep continues.
    """
    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys))) if keys else [()]
    rows, cells, errors = [], [], []
    for combo in combos:
        overrides = dict(zip(keys, combo))
        try:
            cell_env, cell_train = apply_overrides(env_cfg, train_cfg, overrides)
        except (KeyError, ValueError) as exc:
            errors.append({"overrides": overrides, "error": str(exc)})
            continue
        cell_id = config_hash(cell_env, cell_train)
        cells.append({"config_id": cell_id, "overrides": overrides})
        for strategy in strategies:
            kwargs = {"strategy": strategy}
            if checkpoints and strategy in checkpoints:
                kwargs = {"checkpoint": checkpoints[strategy]}
            try:
                summary_rows, _ = evaluate(cell_env, cell_train, n_episodes, seeds,
                                           mean_std_c=mean_std_c, **kwargs)
                rows.extend(summary_rows)
            except Exception as exc:  # record and continue per cell
                errors.append({
                    "overrides": overrides, "strategy": strategy, "error": str(exc)
                })
    return rows, cells, errors


def write_summary_csv(rows: list[dict], out_path: str | Path) -> None:
    with Path(out_path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([
                row["strategy"], row["config_id"],
                format(row["mean_std"], ".17g"),
                format(row["var95"], ".17g"),
                format(row["cvar95"], ".17g"),
                format(row["mean_cost"], ".17g"),
                format(row["premium_income"], ".17g"),
                row["n_episodes"], row["seed"],
            ])


def write_episodes_csv(rows: list[dict], out_path: str | Path) -> None:
    with Path(out_path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPISODE_COLUMNS)
        for row in rows:
            writer.writerow([
                row["strategy"], row["config_id"], row["seed"], row["episode"],
                format(row["pnl"], ".17g"),
                format(row["cost"], ".17g"),
                format(row["premium"], ".17g"),
            ])
