"""SABR market simulator.

Generates correlated Gaussian shocks and simulates asset-price and
instantaneous-volatility paths under the SABR dynamics

    sigma_{t+1} = sigma_t * exp(-upsilon^2/2 * dt + upsilon * q_v * sqrt(dt))
    P_{t+1}     = P_t * exp((mu - (sigma_t * P_t^(beta-1))^2 / 2) * dt
                            + sigma_t * P_t^(beta-1) * sqrt(dt) * q_s)

with q_v = rho * q_s + sqrt(1 - rho^2) * q_i and q_s, q_i i.i.d. standard
normal. Shock matrices are laid out as n_paths x (n_steps + 1); the update
loop consumes columns 0..n_steps-1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SabrParams",
    "ShockSet",
    "PathSet",
    "SimulationError",
    "draw_shocks",
    "correlate",
    "simulate",
    "dump_paths_csv",
]

_U64 = 0xFFFFFFFFFFFFFFFF


class SimulationError(RuntimeError):
    """A path update produced a non-finite price or volatility."""


@dataclass(frozen=True)
class SabrParams:
    """Model parameters. Rates and volatilities are annualized; dt is in years.

    p0:      initial asset price (currency)
    sigma0:  initial instantaneous volatility
    beta:    elasticity exponent in [0, 1]
    rho:     price-volatility shock correlation in [-1, 1]
    upsilon: volatility of volatility
    mu:      drift rate
    r:       risk-free rate
    q:       dividend yield
    dt:      time step in years (1/365 for daily)
    """

    p0: float = 100.0
    sigma0: float = 0.3
    beta: float = 0.5
    rho: float = 0.2
    upsilon: float = 0.3
    mu: float = 0.0
    r: float = 0.0
    q: float = 0.0
    dt: float = 1.0 / 365.0

    def __post_init__(self) -> None:
        if self.p0 <= 0:
            raise ValueError(f"p0 must be positive, got {self.p0}")
        if self.sigma0 < 0:
            raise ValueError(f"sigma0 must be non-negative, got {self.sigma0}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if abs(self.rho) > 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.upsilon < 0:
            raise ValueError(f"upsilon must be non-negative, got {self.upsilon}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class ShockSet:
    """Two independent n_paths x (n_steps+1) standard-normal matrices."""

    q_s: np.ndarray
    q_i: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if self.q_s.shape != self.q_i.shape:
            raise ValueError("q_s and q_i must share the same shape")
        if not (np.isfinite(self.q_s).all() and np.isfinite(self.q_i).all()):
            raise ValueError("shock matrices must be finite")


@dataclass(frozen=True)
class PathSet:
    """Simulated prices and volatilities, n_paths x (n_steps+1); column 0 is t=0."""

    prices: np.ndarray
    vols: np.ndarray
    params: SabrParams


def _column_normals(seed: int, column: int, tag: int, n: int) -> np.ndarray:
    # One counter-based stream per (column, matrix) so growing the path count
    # never reshuffles the shocks already assigned to earlier paths.
    key = np.array([seed & _U64, (2 * column + tag) & _U64], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.standard_normal(n)


def draw_shocks(n_paths: int, n_steps: int, seed: int) -> ShockSet:
    """Draw the two shock matrices, deterministically for a fixed seed.

    Columns are generated independently per time step.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    cols = n_steps + 1
    q_s = np.empty((n_paths, cols))
    q_i = np.empty((n_paths, cols))
    for c in range(cols):
        q_s[:, c] = _column_normals(seed, c, 0, n_paths)
        q_i[:, c] = _column_normals(seed, c, 1, n_paths)
    return ShockSet(q_s=q_s, q_i=q_i, seed=seed)


def correlate(shocks: ShockSet, rho: float) -> np.ndarray:
    """Volatility shocks q_v = rho * q_s + sqrt(1 - rho^2) * q_i."""
    if abs(rho) > 1.0:
        raise ValueError(f"rho must lie in [-1, 1], got {rho}")
    return rho * shocks.q_s + np.sqrt(1.0 - rho * rho) * shocks.q_i


def simulate(params: SabrParams, shocks: ShockSet) -> PathSet:
    """Run the exact per-step SABR updates over the shock horizon.

    Raises SimulationError naming the path and step if any update turns
    non-finite (e.g. from overflow under extreme parameters).
    """
    n, cols = shocks.q_s.shape
    n_steps = cols - 1
    prices = np.empty((n, cols))
    vols = np.empty((n, cols))
    prices[:, 0] = params.p0
    vols[:, 0] = params.sigma0
    q_v = correlate(shocks, params.rho)
    sqrt_dt = np.sqrt(params.dt)
    half_ups2_dt = 0.5 * params.upsilon**2 * params.dt
    for t in range(n_steps):
        sig = vols[:, t]
        px = prices[:, t]
        with np.errstate(over="ignore"):
            diff = sig * px ** (params.beta - 1.0)
            new_px = px * np.exp(
                (params.mu - 0.5 * diff * diff) * params.dt
                + diff * sqrt_dt * shocks.q_s[:, t]
            )
            new_sig = sig * np.exp(-half_ups2_dt + params.upsilon * sqrt_dt * q_v[:, t])
        bad = ~(np.isfinite(new_px) & np.isfinite(new_sig))
        if bad.any():
            raise SimulationError(
                f"non-finite value at path {int(np.argmax(bad))}, step {t + 1}"
            )
        prices[:, t + 1] = new_px
        vols[:, t + 1] = new_sig
    return PathSet(prices=prices, vols=vols, params=params)


def dump_paths_csv(paths: PathSet, out_path: str | Path) -> None:
    """Write the path set as rows `path,step,price,vol`."""
    out_path = Path(out_path)
    n, cols = paths.prices.shape
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "step", "price", "vol"])
        for i in range(n):
            for t in range(cols):
                writer.writerow(
                    [i, t, format(paths.prices[i, t], ".17g"), format(paths.vols[i, t], ".17g")]
                )
