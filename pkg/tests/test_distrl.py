import math

import numpy as np
import pytest

from hedgelab.distrl import (
    Experience,
    QuantileLevels,
    ReplayBuffer,
    actor_forward,
    actor_gradient,
    compute_target,
    critic_forward,
    critic_gradient,
    midpoint_levels,
    quantile_huber_loss,
    sample_action,
)
from hedgelab.nets import MlpParams, MlpSpec, init_mlp, mlp_forward, n_params


class FixedNormal:
    """Stub RNG returning a preset standard normal draw."""

    def __init__(self, z):
        self.z = z

    def standard_normal(self):
        return self.z


def _zero_critic(obs_dim=4, k=4, hidden=(6, 6)):
    spec = MlpSpec(sizes=(obs_dim + 1, *hidden, k))
    return MlpParams(spec=spec, theta=np.zeros(n_params(spec)))


def _random_critic(rng, obs_dim=4, k=4, hidden=(6, 6)):
    return init_mlp(MlpSpec(sizes=(obs_dim + 1, *hidden, k)), rng)


def _random_actor(rng, obs_dim=4, hidden=(6, 6)):
    return init_mlp(MlpSpec(sizes=(obs_dim, *hidden, 1), output_activation="sigmoid"), rng)


def _random_batch(rng, obs_dim=4, size=6, n=2, with_done=True):
    batch = []
    for i in range(size):
        batch.append(
            Experience(
                obs=rng.standard_normal(obs_dim),
                action=float(rng.uniform(0, 1)),
                rewards=tuple(float(r) for r in rng.normal(-1.0, 1.0, size=n)),
                next_obs=rng.standard_normal(obs_dim),
                done=bool(with_done and i == size - 1),
            )
        )
    return batch


# ---------------------------------------------------------------------------
# levels
# ---------------------------------------------------------------------------

def test_midpoint_levels():
    levels = midpoint_levels(8)
    assert levels.array[0] == pytest.approx(1 / 16)
    assert levels.array[-1] == pytest.approx(15 / 16)
    assert np.allclose(np.diff(levels.array), 1 / 8)


def test_levels_validation():
    with pytest.raises(ValueError):
        QuantileLevels((0.2, 0.2))
    with pytest.raises(ValueError):
        QuantileLevels((0.0, 0.5))


# ---------------------------------------------------------------------------
# critic / actor forward
# ---------------------------------------------------------------------------

def test_zero_network_outputs_zero_quantiles():
    critic = _zero_critic()
    out = critic_forward(critic, np.ones(4), 0.5)
    assert out.shape == (4,)
    assert np.all(out == 0.0)


def test_critic_forward_deterministic():
    rng = np.random.default_rng(0)
    critic = _random_critic(rng)
    obs = rng.standard_normal(4)
    a = critic_forward(critic, obs, 0.3)
    b = critic_forward(critic, obs, 0.3)
    assert np.array_equal(a, b)


def test_final_bias_shifts_exactly_one_quantile():
    rng = np.random.default_rng(1)
    critic = _random_critic(rng)
    obs = rng.standard_normal(4)
    base = critic_forward(critic, obs, 0.7)
    shifted = MlpParams(critic.spec, critic.theta.copy())
    shifted.theta[-2] += 0.25  # bias of quantile K-2
    out = critic_forward(shifted, obs, 0.7)
    diff = out - base
    assert diff[-2] == pytest.approx(0.25, rel=1e-12)
    mask = np.ones(4, dtype=bool)
    mask[-2] = False
    assert np.all(diff[mask] == 0.0)


def test_zero_actor_outputs_half():
    spec = MlpSpec(sizes=(4, 6, 6, 1), output_activation="sigmoid")
    actor = MlpParams(spec=spec, theta=np.zeros(n_params(spec)))
    assert actor_forward(actor, np.ones(4)) == 0.5


def test_actor_output_in_unit_interval():
    rng = np.random.default_rng(2)
    actor = _random_actor(rng)
    for _ in range(50):
        a = actor_forward(actor, rng.standard_normal(4) * 3)
        assert 0.0 < a < 1.0


# ---------------------------------------------------------------------------
# sample_action
# ---------------------------------------------------------------------------

def test_sample_action_eval_mode():
    a, logp = sample_action(0.37, 0.0, FixedNormal(1.0))
    assert a == 0.37 and logp == 0.0


def test_sample_action_gaussian_density():
    a, logp = sample_action(0.5, 0.1, FixedNormal(1.0))
    assert a == pytest.approx(0.6, rel=1e-15)
    assert logp == pytest.approx(-math.log(0.1 * math.sqrt(2 * math.pi)) - 0.5, rel=1e-12)


def test_sample_action_clips():
    a, _ = sample_action(0.95, 0.1, FixedNormal(3.0))
    assert a == 1.0
    a, _ = sample_action(0.05, 0.1, FixedNormal(-3.0))
    assert a == 0.0


def test_sample_action_monte_carlo_mean():
    rng = np.random.default_rng(3)
    n = 10**5
    samples = np.array([sample_action(0.5, 0.1, rng)[0] for _ in range(n)])
    assert abs(samples.mean() - 0.5) < 3 * 0.1 / math.sqrt(n)


# ---------------------------------------------------------------------------
# targets
# ---------------------------------------------------------------------------

def test_target_no_bootstrap_at_gamma_zero():
    rng = np.random.default_rng(4)
    critic, actor = _random_critic(rng), _random_actor(rng)
    t = compute_target([2.5], rng.standard_normal(4), False, actor, critic, 0.0)
    assert np.allclose(t, 2.5)


def test_target_terminal_ignores_critic():
    rng = np.random.default_rng(5)
    critic, actor = _random_critic(rng), _random_actor(rng)
    rewards = [1.0, -2.0, 0.5]
    t = compute_target(rewards, rng.standard_normal(4), True, actor, critic, 0.9)
    expected = 1.0 + 0.9 * -2.0 + 0.81 * 0.5
    assert np.allclose(t, expected)


def test_target_two_step_arithmetic():
    # Bootstrap quantiles fixed at 10 via output biases of a zero network.
    rng = np.random.default_rng(6)
    critic = _zero_critic()
    critic.theta[-4:] = 10.0
    actor = _random_actor(rng)
    t = compute_target([1.0, 2.0], rng.standard_normal(4), False, actor, critic, 0.9)
    assert np.allclose(t, 1.0 + 1.8 + 8.1)


# ---------------------------------------------------------------------------
# quantile Huber loss
# ---------------------------------------------------------------------------

def test_loss_zero_at_perfect_fit():
    levels = midpoint_levels(4)
    pred = np.array([1.0, 2.0, 3.0, 4.0])
    loss, grad = quantile_huber_loss(pred, pred.copy(), 1.0, levels)
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_loss_single_level_arithmetic():
    levels = QuantileLevels((0.5,))
    loss, grad = quantile_huber_loss(np.array([0.5]), np.array([0.0]), 1.0, levels)
    # H = 0.125 on the quadratic branch, rho = 0.5.
    assert loss == pytest.approx(0.0625, rel=1e-14)
    assert grad[0] == pytest.approx(0.5 * 0.5, rel=1e-14)


def test_loss_branch_continuity():
    levels = QuantileLevels((0.5,))
    for d in (1.0, -1.0):
        quad_h = 0.5 * d * d
        lin_h = 1.0 * (abs(d) - 0.5)
        assert quad_h == lin_h == 0.5
        loss, _ = quantile_huber_loss(np.array([d]), np.array([0.0]), 1.0, levels)
        rho = abs(0.5 - (d < 0))
        assert loss == pytest.approx(rho * 0.5, rel=1e-14)


def test_loss_linear_branch_constant_gradient_magnitude():
    # Beyond kappa the per-element dH/d(delta) magnitude stays at kappa.
    levels = QuantileLevels((0.25,))
    kappa = 0.5
    _, g1 = quantile_huber_loss(np.array([2.0]), np.array([0.0]), kappa, levels)
    _, g10 = quantile_huber_loss(np.array([20.0]), np.array([0.0]), kappa, levels)
    assert abs(g1[0]) == pytest.approx(abs(g10[0]), rel=1e-14)
    assert abs(g1[0]) == pytest.approx(0.25 * kappa, rel=1e-14)


def test_loss_nonnegative_and_zero_iff_fit():
    rng = np.random.default_rng(7)
    levels = midpoint_levels(8)
    for _ in range(100):
        pred = rng.standard_normal(8) * 3
        target = rng.standard_normal(8) * 3
        loss, _ = quantile_huber_loss(pred, target, 1.0, levels)
        assert loss >= 0.0
        if not np.allclose(pred, target):
            assert loss > 0.0


def test_loss_gradient_matches_finite_difference():
    rng = np.random.default_rng(8)
    levels = midpoint_levels(8)
    pred = rng.standard_normal((5, 8))
    target = rng.standard_normal((5, 8))
    kappa = 0.7
    loss, grad = quantile_huber_loss(pred, target, kappa, levels)
    h = 1e-7
    for b in (0, 3):
        for k in (1, 6):
            up = pred.copy()
            up[b, k] += h
            dn = pred.copy()
            dn[b, k] -= h
            fd = (quantile_huber_loss(up, target, kappa, levels)[0]
                  - quantile_huber_loss(dn, target, kappa, levels)[0]) / (2 * h)
            assert grad[b, k] == pytest.approx(fd, rel=1e-6, abs=1e-9)


# ---------------------------------------------------------------------------
# critic gradient
# ---------------------------------------------------------------------------

def _critic_loss_value(theta, batch, spec, actor, gamma, kappa, levels,
                       frozen_target=None):
    critic = MlpParams(spec=spec, theta=theta)
    obs = np.stack([e.obs for e in batch])
    actions = np.array([e.action for e in batch])
    x = np.concatenate([obs, actions.reshape(-1, 1)], axis=1)
    pred = mlp_forward(critic, x)
    if frozen_target is None:
        from hedgelab.distrl import _target_batch

        target = _target_batch(batch, actor, critic, gamma)
    else:
        target = frozen_target
    return quantile_huber_loss(pred, target, kappa, levels)[0]


def test_critic_gradient_zero_at_perfect_fit():
    # gamma=0 with constant rewards equal to the zero network's output.
    critic = _zero_critic()
    rng = np.random.default_rng(9)
    actor = _random_actor(rng)
    batch = [
        Experience(obs=rng.standard_normal(4), action=0.5, rewards=(0.0,),
                   next_obs=rng.standard_normal(4), done=False)
        for _ in range(4)
    ]
    grad, loss = critic_gradient(batch, critic, actor, 0.0, 1.0, midpoint_levels(4))
    assert loss == 0.0
    assert np.all(grad == 0.0)


@pytest.mark.parametrize("stop_target", [False, True])
def test_critic_gradient_matches_finite_difference(stop_target):
    rng = np.random.default_rng(10)
    critic = _random_critic(rng)
    actor = _random_actor(rng)
    batch = _random_batch(rng)
    gamma, kappa = 0.9, 0.4
    levels = midpoint_levels(4)
    grad, _ = critic_gradient(batch, critic, actor, gamma, kappa, levels,
                              stop_target_gradient=stop_target)

    if stop_target:
        from hedgelab.distrl import _target_batch

        frozen = _target_batch(batch, actor, critic, gamma)
    else:
        frozen = None
    theta0 = critic.theta
    fd = np.empty_like(theta0)
    for i in range(theta0.size):
        h = 1e-6 * max(1.0, abs(theta0[i]))
        up = theta0.copy()
        up[i] += h
        dn = theta0.copy()
        dn[i] -= h
        fd[i] = (
            _critic_loss_value(up, batch, critic.spec, actor, gamma, kappa, levels, frozen)
            - _critic_loss_value(dn, batch, critic.spec, actor, gamma, kappa, levels, frozen)
        ) / (2 * h)
    assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) < 1e-5


def test_critic_gradient_with_target_network():
    # A separate frozen bootstrap network implies stop-gradient behaviour.
    rng = np.random.default_rng(11)
    critic = _random_critic(rng)
    frozen_net = _random_critic(rng)
    actor = _random_actor(rng)
    batch = _random_batch(rng)
    levels = midpoint_levels(4)
    g1, _ = critic_gradient(batch, critic, actor, 0.9, 1.0, levels,
                            target_params=frozen_net)
    from hedgelab.distrl import _target_batch

    frozen = _target_batch(batch, actor, frozen_net, 0.9)
    theta0 = critic.theta
    fd = np.empty_like(theta0)
    for i in range(0, theta0.size, 7):  # spot-check a subset
        h = 1e-6 * max(1.0, abs(theta0[i]))
        up = theta0.copy()
        up[i] += h
        dn = theta0.copy()
        dn[i] -= h
        fd[i] = (
            _critic_loss_value(up, batch, critic.spec, actor, 0.9, 1.0, levels, frozen)
            - _critic_loss_value(dn, batch, critic.spec, actor, 0.9, 1.0, levels, frozen)
        ) / (2 * h)
        assert g1[i] == pytest.approx(fd[i], rel=1e-4, abs=1e-10)


def test_degenerate_environment_gradient_descent():
    # Constant reward, gamma=0, fixed (s, a): plain gradient descent drives
    # every quantile to the reward.
    rng = np.random.default_rng(12)
    critic = _random_critic(rng)
    actor = _random_actor(rng)
    c = 1.0
    batch = [Experience(obs=np.full(4, 0.3), action=0.5, rewards=(c,),
                        next_obs=np.full(4, 0.3), done=False)] * 8
    levels = midpoint_levels(4)
    theta = critic.theta.copy()
    for _ in range(4000):
        params = MlpParams(critic.spec, theta)
        grad, _ = critic_gradient(batch, params, actor, 0.0, 1.0, levels)
        theta = theta - 0.2 * grad
    final = critic_forward(MlpParams(critic.spec, theta), np.full(4, 0.3), 0.5)
    assert np.max(np.abs(final - c)) < 1e-2


# ---------------------------------------------------------------------------
# actor gradient
# ---------------------------------------------------------------------------

def test_actor_gradient_zero_for_constant_values():
    # Identical critic values across the batch cancel against the baseline.
    rng = np.random.default_rng(13)
    actor = _random_actor(rng)
    critic = _zero_critic()
    batch = _random_batch(rng, with_done=False)
    grad, _ = actor_gradient(batch, actor, critic, midpoint_levels(4), 0.1)
    assert np.allclose(grad, 0.0, atol=1e-15)


def test_actor_log_prob_gradient_matches_finite_difference():
    # d log pi(a|s) / d theta = (a - mu)/std^2 * d mu/d theta, checked via FD
    # of the Gaussian log-density.
    rng = np.random.default_rng(14)
    actor = _random_actor(rng)
    obs = rng.standard_normal(4)
    a, std = 0.8, 0.2

    def log_prob(theta):
        mu = actor_forward(MlpParams(actor.spec, theta), obs)
        return -0.5 * ((a - mu) / std) ** 2 - math.log(std) - 0.5 * math.log(2 * math.pi)

    batch = [Experience(obs=obs, action=a, rewards=(0.0,), next_obs=obs, done=False)]
    critic = _zero_critic()
    critic.theta[-4:] = 1.0  # constant value 1 -> gradient = grad log pi * 1
    grad, _ = actor_gradient(batch, actor, critic, midpoint_levels(4), std,
                             use_baseline=False)
    fd = np.empty_like(actor.theta)
    for i in range(actor.theta.size):
        h = 1e-6 * max(1.0, abs(actor.theta[i]))
        up = actor.theta.copy()
        up[i] += h
        dn = actor.theta.copy()
        dn[i] -= h
        fd[i] = (log_prob(up) - log_prob(dn)) / (2 * h)
    assert np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12) < 1e-5


def test_actor_gradient_linear_in_critic_values():
    rng = np.random.default_rng(15)
    actor = _random_actor(rng)
    critic = _random_critic(rng)
    doubled = MlpParams(critic.spec, critic.theta.copy())
    doubled.theta[-critic.spec.sizes[-1] * (critic.spec.sizes[-2] + 1):] *= 2.0
    batch = _random_batch(rng, with_done=False)
    g1, _ = actor_gradient(batch, actor, critic, midpoint_levels(4), 0.1,
                           use_baseline=False)
    g2, _ = actor_gradient(batch, actor, doubled, midpoint_levels(4), 0.1,
                           use_baseline=False)
    assert np.allclose(g2, 2.0 * g1, rtol=1e-12)


def test_actor_gradient_baseline_invariance():
    # Adding a constant to every critic value leaves the gradient unchanged.
    rng = np.random.default_rng(16)
    actor = _random_actor(rng)
    critic = _random_critic(rng)
    shifted = MlpParams(critic.spec, critic.theta.copy())
    shifted.theta[-4:] += 5.0  # all output biases up by the same constant
    batch = _random_batch(rng, with_done=False)
    g1, _ = actor_gradient(batch, actor, critic, midpoint_levels(4), 0.1)
    g2, _ = actor_gradient(batch, actor, shifted, midpoint_levels(4), 0.1)
    assert np.allclose(g1, g2, atol=1e-12)


# ---------------------------------------------------------------------------
# replay buffer
# ---------------------------------------------------------------------------

def _exp(i):
    return Experience(obs=np.array([float(i)]), action=0.0, rewards=(0.0,),
                      next_obs=np.array([0.0]), done=False)


def test_buffer_ring_eviction():
    buf = ReplayBuffer(2, np.random.default_rng(0))
    for i in range(3):
        buf.push(_exp(i))
    stored = {int(e.obs[0]) for e in buf.items}
    assert stored == {1, 2}


def test_buffer_sample_requires_enough_items():
    buf = ReplayBuffer(10, np.random.default_rng(0))
    buf.push(_exp(0))
    with pytest.raises(ValueError):
        buf.sample(2)


def test_buffer_sample_returns_stored_items():
    buf = ReplayBuffer(5, np.random.default_rng(1))
    for i in range(5):
        buf.push(_exp(i))
    batch = buf.sample(5)
    assert all(int(e.obs[0]) in range(5) for e in batch)


def test_buffer_sampling_uniform():
    m = 10
    buf = ReplayBuffer(m, np.random.default_rng(2))
    for i in range(m):
        buf.push(_exp(i))
    n = 10**5
    draws = np.array(
        [int(e.obs[0]) for _ in range(n // m) for e in buf.sample(m)]
    )
    p = 1 / m
    se = math.sqrt(p * (1 - p) / n)
    counts = np.bincount(draws, minlength=m) / n
    assert np.all(np.abs(counts - p) < 3 * se + 1e-12)
