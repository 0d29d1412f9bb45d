"""Configuration files, defaults, hashing, and run manifests.

Config files are flat `key = value` lines with dotted section keys
(`sabr.*`, `env.*`, `train.*`), `#` comments, and blank lines. Every key
has a default; `format_config` emits the full reference. The config hash
(sha256 of the canonical dump, first 12 hex digits) stamps every output
row so results are traceable to their exact configuration.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .market import SabrParams
from .env import EnvConfig

__all__ = [
    "TrainConfig",
    "RunManifest",
    "default_env_config",
    "default_train_config",
    "config_to_items",
    "format_config",
    "parse_config_text",
    "load_config",
    "apply_overrides",
    "config_hash",
    "write_manifest",
]


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters."""

    gamma: float = 0.9
    trajectory_length: int = 2
    batch_size: int = 64
    buffer_capacity: int = 100_000
    quantile_count: int = 8
    huber_kappa: float = 1.0
    explore_std_start: float = 0.1
    explore_std_final: float = 0.01
    eta_critic: float = 1e-3
    eta_actor: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    episodes: int = 2000
    eval_episodes: int = 500
    seeds: tuple[int, ...] = (0, 1, 2)
    hidden: tuple[int, ...] = (64, 64)
    stop_target_gradient: bool = False
    target_tau: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.trajectory_length < 1:
            raise ValueError(f"trajectory_length must be >= 1, got {self.trajectory_length}")
        for name in ("batch_size", "buffer_capacity", "quantile_count", "episodes",
                     "eval_episodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.huber_kappa <= 0:
            raise ValueError("huber_kappa must be positive")


def default_env_config() -> EnvConfig:
    return EnvConfig()


def default_train_config() -> TrainConfig:
    return TrainConfig()


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def config_to_items(env_cfg: EnvConfig, train_cfg: TrainConfig) -> list[tuple[str, str]]:
    """Canonical (key, value-string) pairs for the full configuration."""
    items: list[tuple[str, str]] = []
    for f in dataclasses.fields(SabrParams):
        items.append((f"sabr.{f.name}", _format_value(getattr(env_cfg.sabr, f.name))))
    for f in dataclasses.fields(EnvConfig):
        if f.name == "sabr":
            continue
        items.append((f"env.{f.name}", _format_value(getattr(env_cfg, f.name))))
    for f in dataclasses.fields(TrainConfig):
        items.append((f"train.{f.name}", _format_value(getattr(train_cfg, f.name))))
    return items


def format_config(env_cfg: EnvConfig, train_cfg: TrainConfig) -> str:
    """Reference dump with every key and its current value."""
    lines = ["# hedgelab configuration (all keys with their values)"]
    lines += [f"{k} = {v}" for k, v in config_to_items(env_cfg, train_cfg)]
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_INT_FIELDS = {"hedge_maturity_days", "episode_days", "realized_vol_window",
               "client_maturity_days", "seed", "trajectory_length", "batch_size",
               "buffer_capacity", "quantile_count", "episodes", "eval_episodes"}
_BOOL_FIELDS = {"stop_target_gradient"}
_INT_TUPLE_FIELDS = {"seeds", "hidden"}


def _parse_value(name: str, raw: str):
    if name in _BOOL_FIELDS:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{name}: cannot parse boolean from {raw!r}")
    if name in _INT_TUPLE_FIELDS:
        return tuple(int(x) for x in raw.split(",") if x.strip())
    if name in _INT_FIELDS:
        return int(raw)
    return float(raw)


def apply_overrides(env_cfg: EnvConfig, train_cfg: TrainConfig,
                    overrides: dict[str, str]) -> tuple[EnvConfig, TrainConfig]:
    """Apply dotted-key string overrides, returning new config objects."""
    sabr_kw, env_kw, train_kw = {}, {}, {}
    sabr_fields = {f.name for f in dataclasses.fields(SabrParams)}
    env_fields = {f.name for f in dataclasses.fields(EnvConfig)} - {"sabr"}
    train_fields = {f.name for f in dataclasses.fields(TrainConfig)}
    for key, raw in overrides.items():
        section, _, name = key.partition(".")
        if section == "sabr" and name in sabr_fields:
            sabr_kw[name] = _parse_value(name, raw)
        elif section == "env" and name in env_fields:
            env_kw[name] = _parse_value(name, raw)
        elif section == "train" and name in train_fields:
            train_kw[name] = _parse_value(name, raw)
        else:
            raise KeyError(f"unknown configuration key {key!r}")
    if sabr_kw:
        env_kw["sabr"] = dataclasses.replace(env_cfg.sabr, **sabr_kw)
    new_env = dataclasses.replace(env_cfg, **env_kw) if env_kw else env_cfg
    new_train = dataclasses.replace(train_cfg, **train_kw) if train_kw else train_cfg
    return new_env, new_train


def load_config(path: str | Path | None) -> tuple[EnvConfig, TrainConfig]:
    """Defaults overridden by the given config file (None keeps defaults)."""
    env_cfg, train_cfg = default_env_config(), default_train_config()
    if path is None:
        return env_cfg, train_cfg
    text = Path(path).read_text()
    return apply_overrides(env_cfg, train_cfg, parse_config_text(text))


def config_hash(env_cfg: EnvConfig, train_cfg: TrainConfig) -> str:
    canonical = "\n".join(f"{k} = {v}" for k, v in config_to_items(env_cfg, train_cfg))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


@dataclass
class RunManifest:
    """Everything needed to reproduce one run."""

    command: str
    config: dict[str, str]
    config_hash: str
    seeds: list[int]
    started: str
    finished: str = ""
    outputs: list[str] = field(default_factory=list)

    @classmethod
    def start(cls, command: str, env_cfg: EnvConfig, train_cfg: TrainConfig,
              seeds) -> "RunManifest":
        return cls(
            command=command,
            config=dict(config_to_items(env_cfg, train_cfg)),
            config_hash=config_hash(env_cfg, train_cfg),
            seeds=[int(s) for s in seeds],
            started=time.strftime("%Y-%m-%dT%H:%M:%S"),
        )

    def finish(self, outputs) -> "RunManifest":
        self.finished = time.strftime("%Y-%m-%dT%H:%M:%S")
        self.outputs = [str(o) for o in outputs]
        return self


def write_manifest(manifest: RunManifest, out_path: str | Path) -> None:
    Path(out_path).write_text(json.dumps(dataclasses.asdict(manifest), indent=2) + "\n")
