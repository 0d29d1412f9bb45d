"""Daily vega-hedging environment.

One episode covers `episode_days` trading days on a single simulated market
path. Each step, in order:

    1. book the day's Poisson client arrivals at mid, crediting the premium
       (cost_ratio times the contract price) to cash;
    2. trade the at-the-money hedge option: the action a in [0, a_max] is
       the fraction of the current net option vega neutralized, with
       a_max = min(1, risk_tolerance / |vega|); the trade pays the
       proportional cost cost_ratio * price * |quantity|;
    3. delta-neutralize with the (costless) underlying;
    4. advance the market one day, reprice the books, settle expiries;
    5. reward = -|pnl| - cost, where pnl is the value change excluding the
       transaction-cost cash flow.

Observations are an 8-feature vector (see FEATURE_NAMES). Episodes are
bit-reproducible for a fixed (config, episode index, action sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .market import SabrParams, draw_shocks, simulate
from .portfolio import (
    MarketState,
    OptionContract,
    PortfolioSnapshot,
    aggregate_greeks,
    book_state,
    expire_and_settle,
    implied_vol_for,
    ledger_row,
    sample_arrivals,
)
from .pricing import OptionSpec, bs_price_delta_vega

__all__ = [
    "EnvConfig",
    "StepResult",
    "VegaHedgeEnv",
    "FEATURE_NAMES",
    "action_bound",
    "delta_neutralize",
    "build_observation",
    "realized_volatility",
]

FEATURE_NAMES = (
    "spot_ratio",
    "inst_vol",
    "hedge_implied_vol",
    "realized_vol",
    "vega_ratio",
    "delta_ratio",
    "time_left",
    "prev_action",
)

_DELTA_SCALE = 100.0
_U64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class EnvConfig:
    """Environment parameters; defaults follow the standard experiment grid
    (beta=0.5, rho=0.2, r=q=0, 30-day hedge option, 0.5% option cost)."""

    sabr: SabrParams = field(default_factory=SabrParams)
    hedge_maturity_days: int = 30
    episode_days: int = 30
    cost_ratio: float = 0.005
    risk_tolerance: float = 10_000.0
    arrival_intensity: float = 1.0
    realized_vol_window: int = 10
    # 45-day clients against the 30-day hedge keep vega the dominant risk;
    # much longer books turn the stacked short-dated hedges into a net
    # gamma amplifier and vega neutralization stops reducing variance.
    client_maturity_days: int = 45
    premium_option_value: float = 60.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.cost_ratio < 0:
            raise ValueError(f"cost_ratio must be non-negative, got {self.cost_ratio}")
        if self.episode_days < 1:
            raise ValueError(f"episode_days must be >= 1, got {self.episode_days}")
        if self.hedge_maturity_days < 1:
            raise ValueError(
                f"hedge_maturity_days must be >= 1, got {self.hedge_maturity_days}"
            )
        if self.risk_tolerance <= 0:
            raise ValueError(f"risk_tolerance must be positive, got {self.risk_tolerance}")


@dataclass(frozen=True)
class StepResult:
    next_obs: np.ndarray
    reward: float
    done: bool
    info: dict[str, Any]


def action_bound(vega_total: float, risk_tolerance: float) -> float:
    """Largest permissible hedge fraction min(1, risk_tolerance / |vega|).

    A zero vega yields 1.0; the downstream trade quantity is zero anyway.
    """
    if risk_tolerance <= 0:
        raise ValueError(f"risk_tolerance must be positive, got {risk_tolerance}")
    if vega_total == 0.0:
        return 1.0
    return min(1.0, risk_tolerance / abs(vega_total))


def delta_neutralize(snapshot: PortfolioSnapshot, market: MarketState) -> float:
    """Underlying quantity that zeroes the total delta (options + underlying)."""
    delta_opt, _ = aggregate_greeks(snapshot, market)
    return -(delta_opt + snapshot.underlying_qty)


def realized_volatility(prices, window: int, dt: float) -> float:
    """Annualized sample std of the last `window` log returns (0 if fewer than 2)."""
    arr = np.asarray(prices, dtype=float)
    if arr.size < 3:
        return 0.0
    rets = np.diff(np.log(arr))[-window:]
    if rets.size < 2:
        return 0.0
    return float(rets.std(ddof=1) / math.sqrt(dt))


def _hedge_spec(spot: float, cfg: EnvConfig) -> OptionSpec:
    return OptionSpec(
        strike=spot,
        t_opt=cfg.hedge_maturity_days * cfg.sabr.dt,
        is_call=True,
        units=1.0,
    )


def _hedge_quote(market: MarketState, cfg: EnvConfig) -> tuple[float, float, float, float]:
    """(implied vol, per-unit price, delta, vega) of a fresh ATM hedge option."""
    spec = _hedge_spec(market.spot, cfg)
    iv = implied_vol_for(spec.strike, spec.t_opt, market)
    price, delta, vega = bs_price_delta_vega(
        True, market.spot, spec.strike, market.params.r, market.params.q, iv, spec.t_opt
    )
    return iv, float(price[()]), float(delta[()]), float(vega[()])


def build_observation(snapshot: PortfolioSnapshot, market: MarketState,
                      history, prev_action: float, cfg: EnvConfig,
                      day: int, greeks: tuple[float, float] | None = None) -> np.ndarray:
    """Feature vector in FEATURE_NAMES order; all entries finite and O(1)."""
    hedge_iv, _, _, hedge_vega = _hedge_quote(market, cfg)
    delta_opt, vega_opt = greeks if greeks is not None else aggregate_greeks(snapshot, market)
    vega_scale = hedge_vega * 100.0
    if vega_scale <= 0.0:
        vega_scale = 1.0
    obs = np.array([
        market.spot / cfg.sabr.p0,
        market.vol,
        hedge_iv,
        realized_volatility(history, cfg.realized_vol_window, cfg.sabr.dt),
        vega_opt / vega_scale,
        (delta_opt + snapshot.underlying_qty) / _DELTA_SCALE,
        (cfg.episode_days - day) / cfg.episode_days,
        prev_action,
    ])
    if not np.all(np.isfinite(obs)):
        raise RuntimeError(f"non-finite observation at day {day}: {obs}")
    return obs


class VegaHedgeEnv:
    """Single-path hedging environment; one instance per logical thread."""

    def __init__(self, config: EnvConfig):
        self.cfg = config
        self._done = True
        self._episode = -1

    @property
    def obs_dim(self) -> int:
        return len(FEATURE_NAMES)

    @property
    def done(self) -> bool:
        return self._done

    def reset(self, episode: int = 0) -> np.ndarray:
        cfg = self.cfg
        root = np.random.SeedSequence([cfg.seed & _U64, episode & _U64])
        market_ss, arrivals_ss = root.spawn(2)
        market_seed = int(market_ss.generate_state(1, np.uint64)[0])
        shocks = draw_shocks(1, cfg.episode_days, market_seed)
        paths = simulate(cfg.sabr, shocks)
        self._prices = paths.prices[0]
        self._vols = paths.vols[0]
        self._arrivals_rng = np.random.default_rng(arrivals_ss)
        self._episode = episode
        self._day = 0
        self._done = False
        self._prev_action = 0.0
        self._history = [float(self._prices[0])]
        self._snap = PortfolioSnapshot()
        self._ledger = [ledger_row(self._snap, self._market(0))]
        return self._observe()

    def _market(self, day: int) -> MarketState:
        return MarketState(float(self._prices[day]), float(self._vols[day]), self.cfg.sabr)

    def _observe(self, greeks: tuple[float, float] | None = None) -> np.ndarray:
        return build_observation(self._snap, self._market(self._day), self._history,
                                 self._prev_action, self.cfg, self._day, greeks=greeks)

    def step(self, action: float) -> StepResult:
        if self._done:
            raise RuntimeError("episode is finished; call reset() first")
        cfg = self.cfg
        day = self._day
        market = self._market(day)
        snap = self._snap
        value_prev = snap.value

        # 1. client arrivals, booked at mid plus the premium markup
        arrivals = sample_arrivals(self._arrivals_rng, cfg.arrival_intensity, market,
                                   day, cfg.client_maturity_days)
        premium = 0.0
        cash = snap.cash
        for c in arrivals:
            cash -= c.side * c.spec.units * c.entry_price
            premium += cfg.cost_ratio * c.spec.units * c.entry_price
        cash += premium
        snap = replace(snap, liabilities=snap.liabilities + arrivals, cash=cash)

        # 2. hedge-option trade sized as a fraction of the net option vega
        _, vega_pre = aggregate_greeks(snap, market)
        a_max = action_bound(vega_pre, cfg.risk_tolerance)
        a_exec = min(max(float(action), 0.0), a_max)
        _, hedge_price, _, hedge_vega = _hedge_quote(market, cfg)
        if vega_pre != 0.0 and hedge_vega > 0.0 and a_exec > 0.0:
            qty = a_exec * (-vega_pre) / hedge_vega
        else:
            qty = 0.0
        cost = cfg.cost_ratio * hedge_price * abs(qty)
        if qty != 0.0:
            contract = OptionContract(
                spec=replace(_hedge_spec(market.spot, cfg), units=abs(qty)),
                side=1 if qty > 0 else -1,
                birth_step=day,
                entry_price=hedge_price,
            )
            snap = replace(
                snap,
                hedge_options=snap.hedge_options + (contract,),
                cash=snap.cash - qty * hedge_price - cost,
            )

        # 3. costless delta hedge with the underlying; one revaluation gives
        #    both the trade size and the honest post-trade Greeks
        delta_opt, vega_post = aggregate_greeks(snap, market)
        underlying_trade = -(delta_opt + snap.underlying_qty)
        snap = replace(
            snap,
            underlying_qty=snap.underlying_qty + underlying_trade,
            cash=snap.cash - underlying_trade * market.spot,
        )
        delta_post = delta_opt + snap.underlying_qty

        # 4. advance the market, reprice, settle expiries
        self._day = day + 1
        market_next = self._market(self._day)
        snap = replace(snap, step=self._day)
        snap = expire_and_settle(snap, market_next)
        value_next, delta_next, vega_next = book_state(snap, market_next)
        snap = replace(snap, value=value_next)

        # 5. reward; pnl excludes the transaction-cost cash flow
        pnl = value_next - value_prev + cost
        reward = -abs(pnl) - cost

        self._snap = snap
        self._prev_action = a_exec
        self._history.append(float(self._prices[self._day]))
        self._done = self._day >= cfg.episode_days
        self._ledger.append(ledger_row(snap, market_next, greeks=(delta_next, vega_next)))
        info = {
            "pnl": pnl,
            "cost": cost,
            "action_executed": a_exec,
            "action_bound": a_max,
            "hedge_qty": qty,
            "hedge_price": hedge_price,
            "premium": premium,
            "n_arrivals": len(arrivals),
            "pre_trade_vega": vega_pre,
            "post_trade_vega": vega_post,
            "post_trade_delta": delta_post,
            "value": value_next,
        }
        return StepResult(next_obs=self._observe(greeks=(delta_next, vega_next)),
                          reward=reward, done=self._done, info=info)

    @property
    def ledger_rows(self) -> list[dict]:
        return list(self._ledger)

    @property
    def snapshot(self) -> PortfolioSnapshot:
        return self._snap
