"""Option pricing: Hagan-approximation SABR implied volatility and
Black-Scholes prices and Greeks.

All core routines accept scalars or numpy arrays (broadcasting) so a whole
option book can be revalued in one call. Expiry and zero-volatility inputs
fall back to a discounted intrinsic-value branch because the closed forms
are singular there.

Conventions:
    - The call/put values discount the spot leg by exp(-q*t), so put-call
      parity  C - P = S*exp(-q*t) - K*exp(-r*t)  holds for any dividend
      yield q.
    - Vega is  S * sqrt(t) * pdf(d1)  with no dividend discount. It is the
      exact price sensitivity only for q = 0, which is the regime every
      default configuration uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

__all__ = [
    "OptionSpec",
    "GreeksReport",
    "PricingError",
    "norm_cdf",
    "norm_pdf",
    "forward_price",
    "sabr_implied_vol",
    "bs_d1_d2",
    "bs_price",
    "bs_greeks",
    "bs_price_delta_vega",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class PricingError(ValueError):
    """Invalid or numerically degenerate pricing inputs."""


@dataclass(frozen=True)
class OptionSpec:
    """A European option: strike (currency), time to maturity (years),
    call/put flag, and contract multiplier in underlying units."""

    strike: float
    t_opt: float
    is_call: bool = True
    units: float = 100.0

    def __post_init__(self) -> None:
        if self.strike <= 0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if self.t_opt < 0:
            raise ValueError(f"t_opt must be non-negative, got {self.t_opt}")
        if self.units <= 0:
            raise ValueError(f"units must be positive, got {self.units}")


@dataclass(frozen=True)
class GreeksReport:
    """Per-unit option value with its first-order sensitivities."""

    price: float
    delta: float
    vega: float
    implied_vol: float


def norm_cdf(x):
    """Standard normal CDF via erf (absolute error below 1e-12)."""
    return 0.5 * (1.0 + erf(np.asarray(x, dtype=float) / _SQRT2))


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def forward_price(spot, r, q, t_opt):
    """Forward price F = spot * exp((r - q) * t_opt)."""
    return spot * np.exp((r - q) * np.asarray(t_opt, dtype=float))


def sabr_implied_vol(f, k, sigma, t_opt, beta, rho, upsilon):
    """Hagan-style approximate implied volatility.

    Intermediates:
        x   = (F*K)^((1-beta)/2)
        y   = (1-beta) * ln(F/K)
        Lam = sigma / (x * (1 + y^2/24 + y^4/1920))
        Psi = 1 + t * ((1-beta)^2 sigma^2 / (24 x^2)
                       + rho beta sigma upsilon / (4 x)
                       + upsilon^2 (2 - 3 rho^2) / 24)
        Phi = (upsilon * x / sigma) * ln(F/K)
        chi = ln((sqrt(1 - 2 rho Phi + Phi^2) + Phi - rho) / (1 - rho))

    Returns sigma * Psi / F^(1-beta) where F == K exactly, otherwise
    Lam * Psi * Phi / chi. Raises PricingError when chi degenerates to zero
    off-ATM (e.g. upsilon = 0 with F != K) or the result is not a positive
    finite volatility.
    """
    f = np.asarray(f, dtype=float)
    k = np.asarray(k, dtype=float)
    sigma_a = np.asarray(sigma, dtype=float)
    t_a = np.asarray(t_opt, dtype=float)
    scalar = f.ndim == 0 and k.ndim == 0 and sigma_a.ndim == 0 and t_a.ndim == 0
    if np.any(f <= 0) or np.any(k <= 0):
        raise PricingError("forward and strike must be positive")
    if np.any(sigma_a <= 0):
        raise PricingError("sigma must be positive")
    if np.any(t_a <= 0):
        raise PricingError("t_opt must be positive")

    f, k, sigma_a, t_a = np.broadcast_arrays(f, k, sigma_a, t_a)
    one_m_beta = 1.0 - beta
    x = (f * k) ** (0.5 * one_m_beta)
    psi = 1.0 + t_a * (
        one_m_beta**2 * sigma_a**2 / (24.0 * x * x)
        + rho * beta * sigma_a * upsilon / (4.0 * x)
        + upsilon**2 * (2.0 - 3.0 * rho**2) / 24.0
    )

    out = np.empty(f.shape)
    atm = f == k
    if atm.any():
        out[atm] = (sigma_a * psi / f**one_m_beta)[atm]
    gen = ~atm
    if gen.any():
        if abs(rho) == 1.0:
            raise PricingError("|rho| = 1 is degenerate off-ATM")
        fg, kg, sg, tg = f[gen], k[gen], sigma_a[gen], t_a[gen]
        xg, psig = x[gen], psi[gen]
        log_fk = np.log(fg / kg)
        y = one_m_beta * log_fk
        lam = sg / (xg * (1.0 + y * y / 24.0 + y**4 / 1920.0))
        phi = upsilon * xg / sg * log_fk
        chi = np.log(
            (np.sqrt(1.0 - 2.0 * rho * phi + phi * phi) + phi - rho) / (1.0 - rho)
        )
        if np.any(chi == 0.0) or not np.all(np.isfinite(chi)):
            raise PricingError("chi degenerated to zero off-ATM")
        out[gen] = lam * psig * phi / chi

    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        raise PricingError("implied volatility is not a positive finite number")
    return float(out[()]) if scalar else out


def bs_d1_d2(spot, strike, r, q, sigma_imp, t_opt):
    """d1 = [ln(S/K) + (r - q + sigma^2/2) t] / (sigma sqrt(t)),  d2 = d1 - sigma sqrt(t)."""
    spot = np.asarray(spot, dtype=float)
    sig_rt = np.asarray(sigma_imp, dtype=float) * np.sqrt(np.asarray(t_opt, dtype=float))
    d1 = (np.log(spot / strike) + (r - q + 0.5 * np.asarray(sigma_imp, dtype=float) ** 2) * t_opt) / sig_rt
    d2 = d1 - sig_rt
    if d1.ndim == 0:
        return float(d1), float(d2)
    return d1, d2


def bs_price_delta_vega(is_call, spot, strike, r, q, sigma_imp, t_opt):
    """Vectorized per-unit (price, delta, vega).

    Entries with t_opt <= 0 or sigma_imp <= 0 use the discounted intrinsic
    value, a step-function delta, and zero vega.
    """
    is_call = np.asarray(is_call, dtype=bool)
    spot = np.asarray(spot, dtype=float)
    strike = np.asarray(strike, dtype=float)
    r_a = np.asarray(r, dtype=float)
    q_a = np.asarray(q, dtype=float)
    vol = np.asarray(sigma_imp, dtype=float)
    t = np.asarray(t_opt, dtype=float)
    is_call, spot, strike, r_a, q_a, vol, t = np.broadcast_arrays(
        is_call, spot, strike, r_a, q_a, vol, t
    )

    t_pos = np.maximum(t, 0.0)
    disc_s = spot * np.exp(-q_a * t_pos)
    disc_k = strike * np.exp(-r_a * t_pos)
    live = (t > 0) & (vol > 0)

    sig_rt = np.where(live, vol * np.sqrt(t_pos), 1.0)
    d1 = (np.log(spot / strike) + (r_a - q_a + 0.5 * vol * vol) * t_pos) / sig_rt
    d2 = d1 - sig_rt
    n_d1 = norm_cdf(d1)
    n_d2 = norm_cdf(d2)
    call_live = disc_s * n_d1 - disc_k * n_d2
    put_live = disc_k * (1.0 - n_d2) - disc_s * (1.0 - n_d1)
    price_live = np.where(is_call, call_live, put_live)
    delta_live = np.where(is_call, np.exp(-q_a * t_pos) * n_d1, -np.exp(-q_a * t_pos) * (1.0 - n_d1))
    vega_live = spot * np.sqrt(t_pos) * norm_pdf(d1)

    fwd_gap = disc_s - disc_k
    price_dead = np.where(is_call, np.maximum(fwd_gap, 0.0), np.maximum(-fwd_gap, 0.0))
    delta_dead = np.where(
        is_call,
        np.where(fwd_gap > 0, np.exp(-q_a * t_pos), 0.0),
        np.where(fwd_gap < 0, -np.exp(-q_a * t_pos), 0.0),
    )

    # Cancellation can leave deep-OTM prices a few ulps below zero.
    price = np.maximum(np.where(live, price_live, price_dead), 0.0)
    delta = np.where(live, delta_live, delta_dead)
    vega = np.where(live, vega_live, 0.0)
    return price, delta, vega


def bs_price(spec: OptionSpec, spot, r, q, sigma_imp) -> float:
    """Per-unit Black-Scholes value of one option.

    At t_opt = 0 or sigma_imp = 0 the discounted intrinsic value is returned.
    """
    if spot <= 0:
        raise PricingError(f"spot must be positive, got {spot}")
    price, _, _ = bs_price_delta_vega(
        spec.is_call, spot, spec.strike, r, q, sigma_imp, spec.t_opt
    )
    return float(price[()])


def bs_greeks(spec: OptionSpec, spot, r, q, sigma_imp) -> GreeksReport:
    """Per-unit price, delta, and vega of one option."""
    if spot <= 0:
        raise PricingError(f"spot must be positive, got {spot}")
    price, delta, vega = bs_price_delta_vega(
        spec.is_call, spot, spec.strike, r, q, sigma_imp, spec.t_opt
    )
    return GreeksReport(
        price=float(price[()]),
        delta=float(delta[()]),
        vega=float(vega[()]),
        implied_vol=float(sigma_imp),
    )
