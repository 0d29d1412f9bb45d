import numpy as np

from hedgelab.baselines import STRATEGIES, delta_strategy, delta_vega_strategy
from hedgelab.env import EnvConfig, VegaHedgeEnv


def test_delta_strategy_always_zero():
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert delta_strategy(rng.standard_normal(8)) == 0.0


def test_delta_vega_strategy_always_one():
    rng = np.random.default_rng(1)
    for _ in range(20):
        assert delta_vega_strategy(rng.standard_normal(8)) == 1.0


def test_registry():
    assert set(STRATEGIES) == {"delta", "delta_vega"}


def test_delta_episode_has_zero_costs_and_flat_delta():
    env = VegaHedgeEnv(EnvConfig(seed=2))
    obs = env.reset(0)
    while not env.done:
        res = env.step(delta_strategy(obs))
        obs = res.next_obs
        assert res.info["cost"] == 0.0
        assert res.info["hedge_qty"] == 0.0
        assert abs(res.info["post_trade_delta"]) <= 1e-10


def test_delta_vega_episode_neutralizes_vega():
    env = VegaHedgeEnv(EnvConfig(seed=3))
    obs = env.reset(0)
    while not env.done:
        res = env.step(delta_vega_strategy(obs))
        obs = res.next_obs
        if res.info["action_bound"] >= 1.0:
            pre = res.info["pre_trade_vega"]
            assert abs(res.info["post_trade_vega"]) <= 1e-8 * max(1.0, abs(pre))
        expected_cost = env.cfg.cost_ratio * res.info["hedge_price"] * abs(res.info["hedge_qty"])
        assert res.info["cost"] == expected_cost
