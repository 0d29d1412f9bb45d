"""Risk and profitability metrics over episode loss samples.

Losses are -(episode PNL): larger is worse. Tail metrics are empirical:
with n samples sorted descending and k = ceil(0.05 * n), VaR-95% is the
k-th largest loss and CVaR-95% the mean of the k largest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricsSummary",
    "mean_std",
    "var_cvar_95",
    "profit_summary",
    "summarize",
    "SUMMARY_COLUMNS",
    "MEAN_STD_C",
]

LOSS_CONVENTION = "loss = -pnl (larger is worse)"

# 95% Gaussian quantile aligns the Mean-STD reporting level with VaR-95%.
MEAN_STD_C = 1.645

SUMMARY_COLUMNS = (
    "strategy",
    "config_id",
    "mean_std",
    "var95",
    "cvar95",
    "mean_cost",
    "premium_income",
    "n_episodes",
    "seed",
)


@dataclass(frozen=True)
class MetricsSummary:
    mean_std: float
    var95: float
    cvar95: float
    mean_cost: float
    premium_income: float
    n_episodes: int
    loss_convention: str = LOSS_CONVENTION


def mean_std(losses, c: float = MEAN_STD_C) -> float:
    """mean(losses) + c * sample std (n-1 denominator); needs >= 2 samples."""
    arr = np.asarray(losses, dtype=float)
    if arr.size < 2:
        raise ValueError(f"need at least 2 samples, got {arr.size}")
    return float(arr.mean() + c * arr.std(ddof=1))


def var_cvar_95(losses) -> tuple[float, float]:
    """(VaR-95%, CVaR-95%) of the worst 5% tail; needs >= 20 samples."""
    arr = np.asarray(losses, dtype=float)
    if arr.size < 20:
        raise ValueError(f"need at least 20 samples for a 5% tail, got {arr.size}")
    k = math.ceil(0.05 * arr.size)
    tail = np.sort(arr)[::-1][:k]
    return float(tail[-1]), float(tail.mean())


def profit_summary(episode_costs, cost_ratio: float, premium_option_value: float,
                   days: int, intensity: float) -> tuple[float, float]:
    """(expected premium income, mean realized option cost per episode).

    Premium income is days * intensity * premium_option_value * cost_ratio.
    """
    if cost_ratio < 0:
        raise ValueError(f"cost_ratio must be non-negative, got {cost_ratio}")
    premium_income = days * intensity * premium_option_value * cost_ratio
    costs = np.asarray(episode_costs, dtype=float)
    mean_cost = float(costs.mean()) if costs.size else 0.0
    return premium_income, mean_cost


def summarize(episode_pnls, episode_costs, cost_ratio: float,
              premium_option_value: float, days: int, intensity: float,
              c: float = MEAN_STD_C) -> MetricsSummary:
    """Full summary over per-episode PNL and cost samples."""
    losses = -np.asarray(episode_pnls, dtype=float)
    var95, cvar95 = var_cvar_95(losses)
    premium_income, mean_cost = profit_summary(
        episode_costs, cost_ratio, premium_option_value, days, intensity
    )
    return MetricsSummary(
        mean_std=mean_std(losses, c),
        var95=var95,
        cvar95=cvar95,
        mean_cost=mean_cost,
        premium_income=premium_income,
        n_episodes=int(np.asarray(episode_pnls).size),
    )
