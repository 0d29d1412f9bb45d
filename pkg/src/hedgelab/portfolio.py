"""Liability and hedge books: client-order arrivals, Greek aggregation,
mark-to-market, and expiry settlement.

Snapshots are immutable; every operation returns a new snapshot, so episode
rollouts can run in parallel on copies. Client orders arrive as a Poisson
stream of at-the-money calls on 100 units, long or short with equal
probability, priced at the SABR implied volatility for the prevailing spot
and instantaneous volatility.

Greeks aggregated here cover the option books only; the underlying
position's delta is `underlying_qty` itself and is added by the hedging
layer that decides the offsetting trade.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .market import SabrParams
from .pricing import OptionSpec, bs_price_delta_vega, sabr_implied_vol

__all__ = [
    "OptionContract",
    "MarketState",
    "PortfolioSnapshot",
    "PortfolioError",
    "sample_arrivals",
    "revalue",
    "book_state",
    "aggregate_greeks",
    "mark_to_market",
    "expire_and_settle",
    "ledger_row",
    "write_ledger_csv",
    "LEDGER_COLUMNS",
]

_EXPIRY_EPS = 1e-12

LEDGER_COLUMNS = ("step", "value", "delta_total", "vega_total", "cash",
                  "n_liabilities", "n_hedges")


class PortfolioError(RuntimeError):
    """A book operation failed (e.g. an unpriceable contract)."""


@dataclass(frozen=True)
class OptionContract:
    """A booked option: spec, bank side (+1 long, -1 short), birth day index,
    and the per-unit price at booking."""

    spec: OptionSpec
    side: int
    birth_step: int
    entry_price: float

    def __post_init__(self) -> None:
        if self.side not in (-1, 1):
            raise ValueError(f"side must be +1 or -1, got {self.side}")

    def remaining_t(self, step: int, dt: float) -> float:
        return self.spec.t_opt - (step - self.birth_step) * dt


@dataclass(frozen=True)
class MarketState:
    """Spot price and instantaneous volatility under the given model."""

    spot: float
    vol: float
    params: SabrParams


@dataclass(frozen=True)
class PortfolioSnapshot:
    """Client book, hedge book, underlying position, cash, and the last
    mark-to-market value (cash + underlying*spot + signed option values)."""

    liabilities: tuple[OptionContract, ...] = ()
    hedge_options: tuple[OptionContract, ...] = ()
    underlying_qty: float = 0.0
    cash: float = 0.0
    step: int = 0
    value: float = 0.0

    @property
    def contracts(self) -> tuple[OptionContract, ...]:
        return self.liabilities + self.hedge_options


def implied_vol_for(strike: float, t_rem: float, market: MarketState) -> float:
    """SABR implied volatility for a single contract; 0 when degenerate."""
    if t_rem <= _EXPIRY_EPS or market.vol <= 0.0:
        return 0.0
    p = market.params
    f = market.spot * np.exp((p.r - p.q) * t_rem)
    return sabr_implied_vol(float(f), strike, market.vol, t_rem, p.beta, p.rho, p.upsilon)


def revalue(contracts: tuple[OptionContract, ...], market: MarketState, step: int):
    """Per-unit (price, delta, vega) arrays for a sequence of contracts."""
    n = len(contracts)
    if n == 0:
        z = np.zeros(0)
        return z, z.copy(), z.copy()
    p = market.params
    strikes = np.array([c.spec.strike for c in contracts])
    t_rem = np.array([c.remaining_t(step, p.dt) for c in contracts])
    is_call = np.array([c.spec.is_call for c in contracts])
    if np.any(t_rem < -_EXPIRY_EPS):
        idx = int(np.argmin(t_rem))
        raise PortfolioError(f"contract {contracts[idx]} is past expiry at step {step}")

    iv = np.zeros(n)
    live = (t_rem > _EXPIRY_EPS) & (market.vol > 0.0)
    if live.any():
        fwd = market.spot * np.exp((p.r - p.q) * t_rem[live])
        iv[live] = sabr_implied_vol(fwd, strikes[live], market.vol, t_rem[live],
                                    p.beta, p.rho, p.upsilon)
    price, delta, vega = bs_price_delta_vega(
        is_call, market.spot, strikes, p.r, p.q, iv, np.maximum(t_rem, 0.0)
    )
    if not np.all(np.isfinite(price)):
        idx = int(np.argmax(~np.isfinite(price)))
        raise PortfolioError(f"contract {contracts[idx]} is unpriceable at step {step}")
    return price, delta, vega


def sample_arrivals(rng: np.random.Generator, intensity: float, market: MarketState,
                    step: int, client_maturity_days: int,
                    units: float = 100.0) -> tuple[OptionContract, ...]:
    """Poisson(intensity) at-the-money call arrivals for one day."""
    if intensity < 0:
        raise ValueError(f"intensity must be non-negative, got {intensity}")
    count = int(rng.poisson(intensity)) if intensity > 0 else 0
    if count == 0:
        return ()
    t_opt = client_maturity_days * market.params.dt
    spec = OptionSpec(strike=market.spot, t_opt=t_opt, is_call=True, units=units)
    iv = implied_vol_for(market.spot, t_opt, market)
    price, _, _ = bs_price_delta_vega(
        True, market.spot, market.spot, market.params.r, market.params.q, iv, t_opt
    )
    out = []
    for _ in range(count):
        side = 1 if rng.integers(0, 2) == 1 else -1
        out.append(OptionContract(spec=spec, side=side, birth_step=step,
                                  entry_price=float(price[()])))
    return tuple(out)


def book_state(snapshot: PortfolioSnapshot, market: MarketState) -> tuple[float, float, float]:
    """(value, option delta, option vega) from a single book revaluation."""
    contracts = snapshot.contracts
    value = snapshot.cash + snapshot.underlying_qty * market.spot
    if not contracts:
        return value, 0.0, 0.0
    price, delta, vega = revalue(contracts, market, snapshot.step)
    w = np.array([c.side * c.spec.units for c in contracts])
    return value + float(w @ price), float(w @ delta), float(w @ vega)


def aggregate_greeks(snapshot: PortfolioSnapshot, market: MarketState) -> tuple[float, float]:
    """Signed unit-weighted (delta, vega) over liabilities plus hedge options."""
    _, delta, vega = book_state(snapshot, market)
    return delta, vega


def mark_to_market(snapshot: PortfolioSnapshot, market: MarketState) -> float:
    """Total value: cash + underlying*spot + signed option book values."""
    return book_state(snapshot, market)[0]


def _intrinsic(contract: OptionContract, spot: float) -> float:
    gap = spot - contract.spec.strike
    return max(gap, 0.0) if contract.spec.is_call else max(-gap, 0.0)


def expire_and_settle(snapshot: PortfolioSnapshot, market: MarketState) -> PortfolioSnapshot:
    """Remove contracts at or past expiry, moving intrinsic payoffs to cash.

    Settlement happens at the expiry instant, so the snapshot's total value
    is unchanged.
    """
    dt = market.params.dt
    cash = snapshot.cash

    def split(book):
        nonlocal cash
        kept = []
        for c in book:
            if c.remaining_t(snapshot.step, dt) <= _EXPIRY_EPS:
                cash += c.side * c.spec.units * _intrinsic(c, market.spot)
            else:
                kept.append(c)
        return tuple(kept)

    liabilities = split(snapshot.liabilities)
    hedges = split(snapshot.hedge_options)
    return replace(snapshot, liabilities=liabilities, hedge_options=hedges, cash=cash)


def ledger_row(snapshot: PortfolioSnapshot, market: MarketState,
               greeks: tuple[float, float] | None = None) -> dict:
    delta_opt, vega_opt = greeks if greeks is not None else aggregate_greeks(snapshot, market)
    return {
        "step": snapshot.step,
        "value": snapshot.value,
        "delta_total": delta_opt + snapshot.underlying_qty,
        "vega_total": vega_opt,
        "cash": snapshot.cash,
        "n_liabilities": len(snapshot.liabilities),
        "n_hedges": len(snapshot.hedge_options),
    }


def write_ledger_csv(rows: list[dict], out_path: str | Path) -> None:
    with Path(out_path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LEDGER_COLUMNS)
        for row in rows:
            writer.writerow([
                row["step"],
                format(row["value"], ".17g"),
                format(row["delta_total"], ".17g"),
                format(row["vega_total"], ".17g"),
                format(row["cash"], ".17g"),
                row["n_liabilities"],
                row["n_hedges"],
            ])
