"""Training loop: alternating critic and actor updates on n-step segments.

Each iteration rolls the environment forward `trajectory_length` steps with
Gaussian exploration, pushes one n-step experience, samples a batch, and
applies one accelerated optimizer step to the critic and one to the actor.
Exploration noise decays linearly over the episode budget. A non-finite
loss aborts with a diagnostic dump.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig, config_hash
from .distrl import (
    Experience,
    ReplayBuffer,
    actor_forward,
    actor_gradient,
    critic_gradient,
    midpoint_levels,
    sample_action,
)
from .env import EnvConfig, VegaHedgeEnv
from .nets import MlpParams, MlpSpec, init_mlp
from .optimizer import OptState, accelerated_step

__all__ = [
    "TrainResult",
    "TrainingDiverged",
    "train",
    "explore_std_at",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_FORMAT",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_FORMAT = "hedgelab-checkpoint"
CHECKPOINT_VERSION = 1

LOG_COLUMNS = ("iteration", "episode", "critic_loss", "mean_value", "action_mean",
               "reward_mean", "explore_std")

_U64 = 0xFFFFFFFFFFFFFFFF


class TrainingDiverged(RuntimeError):
    """A loss or gradient turned non-finite during training."""


@dataclass
class TrainResult:
    critic: MlpParams
    actor: MlpParams
    critic_opt: OptState
    actor_opt: OptState
    log_rows: list[dict] = field(default_factory=list)
    iterations: int = 0
    episodes: int = 0
    wall_time: float = 0.0


def explore_std_at(cfg: TrainConfig, episode: int) -> float:
    """Linear decay from explore_std_start to explore_std_final over the budget."""
    if cfg.episodes <= 1:
        return cfg.explore_std_final
    frac = min(episode / (cfg.episodes - 1), 1.0)
    return cfg.explore_std_start + frac * (cfg.explore_std_final - cfg.explore_std_start)


def _soft_update(target: np.ndarray, source: np.ndarray, tau: float) -> np.ndarray:
    return (1.0 - tau) * target + tau * source


def train(env_cfg: EnvConfig, train_cfg: TrainConfig, seed: int = 0,
          out_dir: str | Path | None = None, env=None) -> TrainResult:
    """Train a critic/actor pair; deterministic for fixed configs and seed.

    `env` may supply any object with reset(episode)->obs, step(a)->StepResult,
    done, and obs_dim; by default a VegaHedgeEnv is built from env_cfg.
    """
    t_start = time.time()
    if env is None:
        env = VegaHedgeEnv(env_cfg)
    obs_dim = env.obs_dim

    root = np.random.SeedSequence([seed & _U64, 0x7E57])
    ss_critic, ss_actor, ss_explore, ss_buffer = root.spawn(4)
    critic = init_mlp(
        MlpSpec(sizes=(obs_dim + 1, *train_cfg.hidden, train_cfg.quantile_count)),
        np.random.default_rng(ss_critic),
    )
    actor = init_mlp(
        MlpSpec(sizes=(obs_dim, *train_cfg.hidden, 1), output_activation="sigmoid"),
        np.random.default_rng(ss_actor),
    )
    critic_opt = OptState.fresh(critic.theta, eta=train_cfg.eta_critic,
                                beta1=train_cfg.beta1, beta2=train_cfg.beta2,
                                eps=train_cfg.eps)
    actor_opt = OptState.fresh(actor.theta, eta=train_cfg.eta_actor,
                               beta1=train_cfg.beta1, beta2=train_cfg.beta2,
                               eps=train_cfg.eps)
    target_theta = critic.theta.copy() if train_cfg.target_tau > 0 else None

    levels = midpoint_levels(train_cfg.quantile_count)
    buffer = ReplayBuffer(train_cfg.buffer_capacity, np.random.default_rng(ss_buffer))
    explore_rng = np.random.default_rng(ss_explore)

    log_rows: list[dict] = []
    iteration = 0
    result = TrainResult(critic=critic, actor=actor, critic_opt=critic_opt,
                         actor_opt=actor_opt, log_rows=log_rows)

    for episode in range(train_cfg.episodes):
        std = explore_std_at(train_cfg, episode)
        obs = env.reset(episode)
        seg_obs, seg_action, seg_rewards = None, None, []
        actions_in_seg: list[float] = []
        while not env.done:
            mean = actor_forward(actor, obs)
            a, _ = sample_action(mean, std, explore_rng)
            res = env.step(a)
            if seg_obs is None:
                seg_obs, seg_action = obs, a
            seg_rewards.append(res.reward)
            actions_in_seg.append(res.info.get("action_executed", a))
            obs = res.next_obs
            if len(seg_rewards) == train_cfg.trajectory_length or res.done:
                pushed_rewards = tuple(seg_rewards)
                buffer.push(Experience(obs=seg_obs, action=seg_action,
                                       rewards=pushed_rewards,
                                       next_obs=obs, done=res.done))
                seg_obs, seg_action, seg_rewards = None, None, []
                if len(buffer) >= train_cfg.batch_size:
                    iteration += 1
                    batch = buffer.sample(train_cfg.batch_size)
                    loss_box = {}

                    target_params = (
                        MlpParams(critic.spec, target_theta)
                        if target_theta is not None else None
                    )

                    def critic_grad_at(theta):
                        g, loss = critic_gradient(
                            batch, MlpParams(critic.spec, theta), actor,
                            train_cfg.gamma, train_cfg.huber_kappa, levels,
                            stop_target_gradient=train_cfg.stop_target_gradient,
                            target_params=target_params,
                        )
                        loss_box["loss"] = loss
                        return g

                    try:
                        new_theta, critic_opt = accelerated_step(
                            critic_opt, critic.theta, critic_grad_at
                        )
                    except FloatingPointError as exc:
                        _dump_divergence(out_dir, iteration, episode, critic, actor, exc)
                        raise TrainingDiverged(str(exc)) from exc
                    critic = MlpParams(critic.spec, new_theta)
                    if target_theta is not None:
                        target_theta = _soft_update(target_theta, critic.theta,
                                                    train_cfg.target_tau)

                    value_box = {}

                    def actor_grad_at(theta):
                        g, mean_q = actor_gradient(
                            batch, MlpParams(actor.spec, theta), critic, levels,
                            explore_std=max(std, train_cfg.explore_std_final, 1e-6),
                        )
                        value_box["mean_value"] = mean_q
                        return -g  # ascent on the expected value

                    try:
                        new_theta, actor_opt = accelerated_step(
                            actor_opt, actor.theta, actor_grad_at
                        )
                    except FloatingPointError as exc:
                        _dump_divergence(out_dir, iteration, episode, critic, actor, exc)
                        raise TrainingDiverged(str(exc)) from exc
                    actor = MlpParams(actor.spec, new_theta)

                    loss = loss_box["loss"]
                    if not np.isfinite(loss):
                        _dump_divergence(out_dir, iteration, episode, critic, actor,
                                         f"loss={loss}")
                        raise TrainingDiverged(f"non-finite loss {loss} at iteration {iteration}")
                    log_rows.append({
                        "iteration": iteration,
                        "episode": episode,
                        "critic_loss": loss,
                        "mean_value": value_box["mean_value"],
                        "action_mean": float(np.mean(actions_in_seg)),
                        "reward_mean": float(np.mean(pushed_rewards)),
                        "explore_std": std,
                    })
                actions_in_seg = []

    result.critic, result.actor = critic, actor
    result.critic_opt, result.actor_opt = critic_opt, actor_opt
    result.iterations = iteration
    result.episodes = train_cfg.episodes
    result.wall_time = time.time() - t_start

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_training_log(log_rows, out_dir / "training_log.csv")
        save_checkpoint(out_dir / "checkpoint.json", result,
                        meta={"seed": seed, "config_hash": config_hash(env_cfg, train_cfg)})
    return result


def _dump_divergence(out_dir, iteration, episode, critic, actor, exc) -> None:
    if out_dir is None:
        return
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    diag = {
        "iteration": iteration,
        "episode": episode,
        "error": str(exc),
        "critic_norm": float(np.linalg.norm(critic.theta)),
        "actor_norm": float(np.linalg.norm(actor.theta)),
    }
    (out_dir / "divergence.json").write_text(json.dumps(diag, indent=2) + "\n")


def write_training_log(rows: list[dict], out_path: str | Path) -> None:
    with Path(out_path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for row in rows:
            writer.writerow([
                row["iteration"], row["episode"],
                format(row["critic_loss"], ".17g"),
                format(row["mean_value"], ".17g"),
                format(row["action_mean"], ".17g"),
                format(row["reward_mean"], ".17g"),
                format(row["explore_std"], ".17g"),
            ])


def _params_to_dict(params: MlpParams) -> dict:
    return {
        "sizes": list(params.spec.sizes),
        "output_activation": params.spec.output_activation,
        "theta": params.theta.tolist(),
    }


def _params_from_dict(d: dict) -> MlpParams:
    return MlpParams(
        spec=MlpSpec(sizes=tuple(d["sizes"]), output_activation=d["output_activation"]),
        theta=np.asarray(d["theta"], dtype=float),
    )


def _opt_to_dict(state: OptState) -> dict:
    return {
        "theta_prev": state.theta_prev.tolist(),
        "m": state.m.tolist(),
        "v": state.v.tolist(),
        "t": state.t,
        "r": state.r,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "eps": state.eps,
        "eta": state.eta,
    }


def _opt_from_dict(d: dict) -> OptState:
    return OptState(
        theta_prev=np.asarray(d["theta_prev"], dtype=float),
        m=np.asarray(d["m"], dtype=float),
        v=np.asarray(d["v"], dtype=float),
        t=float(d["t"]),
        r=int(d["r"]),
        beta1=float(d["beta1"]),
        beta2=float(d["beta2"]),
        eps=float(d["eps"]),
        eta=float(d["eta"]),
    )


def save_checkpoint(path: str | Path, result: TrainResult, meta: dict | None = None) -> None:
    """Versioned JSON checkpoint: both networks plus optimizer states."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "critic": _params_to_dict(result.critic),
        "actor": _params_to_dict(result.actor),
        "critic_opt": _opt_to_dict(result.critic_opt),
        "actor_opt": _opt_to_dict(result.actor_opt),
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_checkpoint(path: str | Path) -> dict:
    """Load a checkpoint into MlpParams / OptState objects."""
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    return {
        "critic": _params_from_dict(payload["critic"]),
        "actor": _params_from_dict(payload["actor"]),
        "critic_opt": _opt_from_dict(payload["critic_opt"]),
        "actor_opt": _opt_from_dict(payload["actor_opt"]),
        "meta": payload.get("meta", {}),
    }
