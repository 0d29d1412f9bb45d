import math

import numpy as np
import pytest

from hedgelab.market import (
    PathSet,
    SabrParams,
    ShockSet,
    SimulationError,
    correlate,
    draw_shocks,
    dump_paths_csv,
    simulate,
)


def test_draw_shocks_deterministic_for_fixed_seed():
    a = draw_shocks(1, 1, seed=42)
    b = draw_shocks(1, 1, seed=42)
    assert np.array_equal(a.q_s, b.q_s)
    assert np.array_equal(a.q_i, b.q_i)


def test_draw_shocks_different_seeds_differ():
    a = draw_shocks(4, 3, seed=1)
    b = draw_shocks(4, 3, seed=2)
    assert not np.array_equal(a.q_s, b.q_s)


def test_draw_shocks_column_means_near_zero():
    # Monte Carlo standard-error oracle: mean of n standard normals has SE 1/sqrt(n).
    n = 10**5
    shocks = draw_shocks(n, 1, seed=7)
    se = 1.0 / math.sqrt(n)
    for col in range(shocks.q_s.shape[1]):
        assert abs(shocks.q_s[:, col].mean()) < 3 * se
        assert abs(shocks.q_i[:, col].mean()) < 3 * se


def test_draw_shocks_unit_variance():
    n = 10**5
    shocks = draw_shocks(n, 1, seed=11)
    assert 0.98 <= shocks.q_s.var() <= 1.02
    assert 0.98 <= shocks.q_i.var() <= 1.02


def test_draw_shocks_streams_independent():
    n = 10**5
    shocks = draw_shocks(n, 1, seed=3)
    corr = np.corrcoef(shocks.q_s.ravel(), shocks.q_i.ravel())[0, 1]
    assert abs(corr) < 3.0 / math.sqrt(2 * n)


def test_growing_path_count_preserves_earlier_paths():
    small = draw_shocks(50, 5, seed=9)
    big = draw_shocks(200, 5, seed=9)
    assert np.array_equal(big.q_s[:50], small.q_s)
    assert np.array_equal(big.q_i[:50], small.q_i)


def test_draw_shocks_rejects_bad_sizes():
    with pytest.raises(ValueError):
        draw_shocks(0, 1, seed=0)
    with pytest.raises(ValueError):
        draw_shocks(1, 0, seed=0)


def test_correlate_zero_rho_returns_q_i():
    shocks = draw_shocks(10, 3, seed=5)
    assert np.array_equal(correlate(shocks, 0.0), shocks.q_i)


def test_correlate_unit_rho_returns_q_s():
    shocks = draw_shocks(10, 3, seed=5)
    assert np.array_equal(correlate(shocks, 1.0), shocks.q_s)


def test_correlate_direct_value():
    # rho*q_s + sqrt(1-rho^2)*q_i at q_s=1.0, q_i=0.5, rho=0.2
    shocks = ShockSet(q_s=np.array([[1.0]]), q_i=np.array([[0.5]]), seed=0)
    got = correlate(shocks, 0.2)[0, 0]
    assert got == pytest.approx(0.2 + math.sqrt(0.96) * 0.5, abs=1e-12)
    assert got == pytest.approx(0.689897948556636, abs=1e-12)


def test_correlate_rejects_rho_out_of_range():
    shocks = draw_shocks(2, 2, seed=0)
    with pytest.raises(ValueError):
        correlate(shocks, 1.5)


def test_simulate_zero_vol_of_vol_keeps_vols_constant():
    params = SabrParams(upsilon=0.0)
    shocks = draw_shocks(20, 10, seed=1)
    paths = simulate(params, shocks)
    assert np.all(paths.vols == params.sigma0)


def test_simulate_zero_vol_zero_drift_keeps_prices_constant():
    params = SabrParams(sigma0=0.0, mu=0.0)
    shocks = draw_shocks(20, 10, seed=1)
    paths = simulate(params, shocks)
    assert np.all(paths.prices == params.p0)


def test_simulate_deterministic():
    params = SabrParams()
    shocks = draw_shocks(8, 12, seed=21)
    a = simulate(params, shocks)
    b = simulate(params, shocks)
    assert np.array_equal(a.prices, b.prices)
    assert np.array_equal(a.vols, b.vols)


def test_simulate_initial_column():
    params = SabrParams(p0=120.0, sigma0=0.25)
    paths = simulate(params, draw_shocks(5, 4, seed=2))
    assert np.all(paths.prices[:, 0] == 120.0)
    assert np.all(paths.vols[:, 0] == 0.25)


def test_simulate_positivity():
    params = SabrParams(sigma0=0.5, upsilon=0.8)
    paths = simulate(params, draw_shocks(1000, 30, seed=4))
    assert np.all(paths.prices > 0)
    assert np.all(paths.vols > 0)


def test_simulate_martingale_when_driftless_lognormal():
    # mu=0, beta=1: E[P_T] = p0 exactly; Monte Carlo mean within 3 standard errors.
    params = SabrParams(mu=0.0, beta=1.0, sigma0=0.3)
    n = 10**5
    paths = simulate(params, draw_shocks(n, 30, seed=13))
    ratio = paths.prices[:, -1] / params.p0
    se = ratio.std(ddof=1) / math.sqrt(n)
    assert abs(ratio.mean() - 1.0) < 3 * se


def test_simulate_single_step_matches_hand_formula():
    params = SabrParams(p0=100.0, sigma0=0.3, beta=0.5, rho=0.2, upsilon=0.3, mu=0.05)
    shocks = ShockSet(q_s=np.array([[0.7, 0.0]]), q_i=np.array([[-0.3, 0.0]]), seed=0)
    paths = simulate(params, shocks)
    dt = params.dt
    q_v = 0.2 * 0.7 + math.sqrt(1 - 0.04) * (-0.3)
    sig1 = 0.3 * math.exp(-0.5 * 0.09 * dt + 0.3 * q_v * math.sqrt(dt))
    diff = 0.3 * 100.0 ** (-0.5)
    px1 = 100.0 * math.exp((0.05 - 0.5 * diff * diff) * dt + diff * math.sqrt(dt) * 0.7)
    assert paths.vols[0, 1] == pytest.approx(sig1, rel=1e-15)
    assert paths.prices[0, 1] == pytest.approx(px1, rel=1e-15)


def test_simulate_reports_nonfinite_location():
    # Absurd drift overflows the exponential on the first step.
    params = SabrParams(mu=1e6, sigma0=0.3, dt=1.0)
    shocks = draw_shocks(3, 2, seed=0)
    with pytest.raises(SimulationError, match=r"step 1"):
        simulate(params, shocks)


def test_params_validation():
    with pytest.raises(ValueError):
        SabrParams(p0=-1.0)
    with pytest.raises(ValueError):
        SabrParams(beta=1.5)
    with pytest.raises(ValueError):
        SabrParams(rho=-2.0)
    with pytest.raises(ValueError):
        SabrParams(dt=0.0)


def test_dump_paths_csv(tmp_path):
    params = SabrParams()
    paths = simulate(params, draw_shocks(2, 3, seed=1))
    out = tmp_path / "paths.csv"
    dump_paths_csv(paths, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "path,step,price,vol"
    assert len(lines) == 1 + 2 * 4
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "0"
    assert float(first[2]) == params.p0
