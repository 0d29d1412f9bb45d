"""Distributional critic, stochastic actor, and replay storage.

The critic maps (state features, action) to K return quantiles and is
trained with the asymmetric quantile Huber loss

    rho_tau = |tau - 1{delta < 0}|
    H(delta) = delta^2/2            if |delta| <= kappa
               kappa(|delta|-kappa/2) otherwise

against n-step bootstrapped targets. The actor outputs a deterministic
mean action through a sigmoid; exploration wraps it in a clipped Gaussian,
which also supplies the log-probability the policy gradient needs.

Quantile outputs and observations are plain float64 arrays: a quantile set
is shape (K,), batched (B, K). Monotonicity across quantile levels is not
enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nets import MlpParams, mlp_backward, mlp_forward

__all__ = [
    "QuantileLevels",
    "midpoint_levels",
    "Experience",
    "ReplayBuffer",
    "critic_forward",
    "actor_forward",
    "sample_action",
    "compute_target",
    "quantile_huber_loss",
    "critic_gradient",
    "actor_gradient",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class QuantileLevels:
    """Strictly increasing quantile levels in (0,1) and the weight rule tag."""

    levels: tuple[float, ...]
    rule: str = "asymmetric"

    def __post_init__(self) -> None:
        arr = np.asarray(self.levels)
        if arr.size == 0 or np.any(arr <= 0) or np.any(arr >= 1):
            raise ValueError("levels must lie strictly inside (0, 1)")
        if np.any(np.diff(arr) <= 0):
            raise ValueError("levels must be strictly increasing")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.levels)


def midpoint_levels(k: int) -> QuantileLevels:
    """Midpoint levels tau_i = (2i - 1) / (2K)."""
    if k < 1:
        raise ValueError(f"need at least one level, got {k}")
    return QuantileLevels(tuple((2 * i - 1) / (2 * k) for i in range(1, k + 1)))


@dataclass(frozen=True)
class Experience:
    """One n-step transition: obs, executed action, the n rewards, the state
    n steps later, and whether the episode ended inside the segment."""

    obs: np.ndarray
    action: float
    rewards: tuple[float, ...]
    next_obs: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform with-replacement sampling."""

    def __init__(self, capacity: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: list[Experience] = []
        self._cursor = 0
        self._rng = rng

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Experience) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int) -> list[Experience]:
        if batch_size > len(self._items):
            raise ValueError(
                f"cannot sample {batch_size} items from a buffer of {len(self._items)}"
            )
        idx = self._rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]

    @property
    def items(self) -> tuple[Experience, ...]:
        return tuple(self._items)


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------

def _critic_batch(params: MlpParams, obs: np.ndarray, actions: np.ndarray,
                  return_cache: bool = False):
    x = np.concatenate([obs, actions.reshape(-1, 1)], axis=1)
    return mlp_forward(params, x, return_cache=return_cache)


def critic_forward(params: MlpParams, obs: np.ndarray, action: float) -> np.ndarray:
    """Return quantiles for one (state, action), shape (K,)."""
    out = _critic_batch(params, np.asarray(obs, dtype=float).reshape(1, -1),
                        np.array([action], dtype=float))
    return out[0]


def _actor_batch(params: MlpParams, obs: np.ndarray, return_cache: bool = False):
    return mlp_forward(params, obs, return_cache=return_cache)


def actor_forward(params: MlpParams, obs: np.ndarray) -> float:
    """Deterministic mean action in (0, 1)."""
    out = _actor_batch(params, np.asarray(obs, dtype=float).reshape(1, -1))
    return float(out[0, 0])


def sample_action(mean: float, explore_std: float, rng: np.random.Generator) -> tuple[float, float]:
    """Clipped-Gaussian exploration around the actor mean.

    Returns the action clip(mean + std*z, 0, 1) and the Gaussian log-density
    at the pre-clip sample. explore_std=0 is evaluation mode (action=mean,
    log-probability 0).
    """
    if explore_std < 0:
        raise ValueError(f"explore_std must be non-negative, got {explore_std}")
    if explore_std == 0.0:
        return float(mean), 0.0
    z = rng.standard_normal()
    raw = mean + explore_std * z
    log_prob = -0.5 * z * z - math.log(explore_std) - _LOG_SQRT_2PI
    return float(min(max(raw, 0.0), 1.0)), float(log_prob)


# ---------------------------------------------------------------------------
# targets and loss
# ---------------------------------------------------------------------------

def _target_batch(batch: list[Experience], actor_params: MlpParams,
                  critic_params: MlpParams, gamma: float) -> np.ndarray:
    """n-step targets sum_k gamma^k r_k + gamma^n Z(s_n, pi(s_n)), (B, K)."""
    returns = np.array(
        [sum(g * r for g, r in zip(_gamma_powers(gamma, len(e.rewards)), e.rewards))
         for e in batch]
    )
    boot_w = np.array(
        [0.0 if e.done else gamma ** len(e.rewards) for e in batch]
    )
    next_obs = np.stack([e.next_obs for e in batch])
    next_actions = _actor_batch(actor_params, next_obs)[:, 0]
    z_next = _critic_batch(critic_params, next_obs, next_actions)
    return returns[:, None] + boot_w[:, None] * z_next


def _gamma_powers(gamma: float, n: int) -> list[float]:
    out, g = [], 1.0
    for _ in range(n):
        out.append(g)
        g *= gamma
    return out


def compute_target(rewards, next_obs, done: bool, actor_params: MlpParams,
                   critic_params: MlpParams, gamma: float) -> np.ndarray:
    """Target quantiles for one experience, shape (K,)."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    e = Experience(obs=np.asarray(next_obs, dtype=float), action=0.0,
                   rewards=tuple(float(r) for r in rewards),
                   next_obs=np.asarray(next_obs, dtype=float), done=done)
    return _target_batch([e], actor_params, critic_params, gamma)[0]


def quantile_huber_loss(pred: np.ndarray, target: np.ndarray, huber_kappa: float,
                        levels: QuantileLevels) -> tuple[float, np.ndarray]:
    """Loss and its exact derivative with respect to delta = pred - target.

    loss = mean over the batch of sum_tau rho_tau * H(delta_tau) with
    rho_tau = |tau - 1{delta_tau < 0}|. The returned derivative has the
    input's shape and already includes the rho weight and batch averaging,
    so it is d(loss)/d(delta) elementwise.
    """
    if huber_kappa <= 0:
        raise ValueError(f"huber_kappa must be positive, got {huber_kappa}")
    pred = np.asarray(pred, dtype=float)
    squeeze = pred.ndim == 1
    p = pred.reshape(1, -1) if squeeze else pred
    t = np.asarray(target, dtype=float).reshape(p.shape)
    tau = levels.array[None, :]
    if tau.shape[1] != p.shape[1]:
        raise ValueError("quantile level count does not match prediction width")
    delta = p - t
    rho = np.abs(tau - (delta < 0))
    absd = np.abs(delta)
    quad = absd <= huber_kappa
    # overflow on the masked-out quadratic branch just propagates inf/nan
    # into the loss, which the divergence detector reports
    with np.errstate(over="ignore"):
        h = np.where(quad, 0.5 * delta * delta,
                     huber_kappa * (absd - 0.5 * huber_kappa))
        loss = float((rho * h).sum(axis=1).mean())
    dh = np.where(quad, delta, huber_kappa * np.sign(delta))
    d_delta = rho * dh / p.shape[0]
    return loss, (d_delta[0] if squeeze else d_delta)


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def critic_gradient(batch: list[Experience], critic_params: MlpParams,
                    actor_params: MlpParams, gamma: float, huber_kappa: float,
                    levels: QuantileLevels,
                    stop_target_gradient: bool = False,
                    target_params: MlpParams | None = None) -> tuple[np.ndarray, float]:
    """Backpropagated gradient of the quantile Huber loss, with the loss value.

    By default the target's own dependence on the critic parameters flows
    through the gradient (d delta = dZ(s,a) - gamma^n dZ(s_n, pi(s_n)));
    stop_target_gradient treats the target as a constant. target_params,
    when given, computes targets from a separate (frozen) network, which
    implies the stop-gradient behaviour.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    obs = np.stack([e.obs for e in batch])
    actions = np.array([e.action for e in batch])
    pred, cache_pred = _critic_batch(critic_params, obs, actions, return_cache=True)

    boot_w = np.array([0.0 if e.done else gamma ** len(e.rewards) for e in batch])
    returns = np.array(
        [sum(g * r for g, r in zip(_gamma_powers(gamma, len(e.rewards)), e.rewards))
         for e in batch]
    )
    next_obs = np.stack([e.next_obs for e in batch])
    next_actions = _actor_batch(actor_params, next_obs)[:, 0]
    bootstrap_net = target_params if target_params is not None else critic_params
    z_next, cache_next = _critic_batch(bootstrap_net, next_obs, next_actions,
                                       return_cache=True)
    target = returns[:, None] + boot_w[:, None] * z_next

    loss, d_delta = quantile_huber_loss(pred, target, huber_kappa, levels)
    grad = mlp_backward(critic_params, cache_pred, d_delta)
    if not stop_target_gradient and target_params is None:
        grad += mlp_backward(critic_params, cache_next, -boot_w[:, None] * d_delta)
    return grad, loss


def actor_gradient(batch: list[Experience], actor_params: MlpParams,
                   critic_params: MlpParams, levels: QuantileLevels,
                   explore_std: float,
                   use_baseline: bool = True) -> tuple[np.ndarray, float]:
    """Policy gradient: mean over the batch of grad log pi(a|s) * advantage.

    The critic's value signal is the mean of its quantiles at the stored
    (s, a); the baseline subtracts the batch mean. The Gaussian policy's
    log-density gradient is (a - mu(s)) / std^2 * grad mu(s). Returns the
    ascent-direction gradient and the batch-mean value estimate.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    if explore_std <= 0:
        raise ValueError("explore_std must be positive for a policy gradient")
    obs = np.stack([e.obs for e in batch])
    actions = np.array([e.action for e in batch])
    mu, cache = _actor_batch(actor_params, obs, return_cache=True)
    z = _critic_batch(critic_params, obs, actions)
    q_hat = z.mean(axis=1)
    adv = q_hat - q_hat.mean() if use_baseline else q_hat
    d_mu = (adv * (actions - mu[:, 0]) / explore_std**2 / len(batch))[:, None]
    grad = mlp_backward(actor_params, cache, d_mu)
    return grad, float(q_hat.mean())
