"""Rule-based comparison strategies.

Both are stateless maps from observation to hedge fraction. Delta hedging
never trades options (the environment's daily delta-neutralization is the
whole strategy); delta-vega hedging fully neutralizes the net vega every
day, clipped to the environment's action bound.
"""

from __future__ import annotations

import numpy as np

__all__ = ["delta_strategy", "delta_vega_strategy", "STRATEGIES"]


def delta_strategy(obs: np.ndarray) -> float:
    return 0.0


def delta_vega_strategy(obs: np.ndarray) -> float:
    return 1.0


STRATEGIES = {
    "delta": delta_strategy,
    "delta_vega": delta_vega_strategy,
}
