"""Nesterov-accelerated adaptive-moment optimizer.

Each step extrapolates to an auxiliary point using the momentum schedule

    t_{r+1} = (1 + sqrt(1 + 4 t_r^2)) / 2,   t_0 = 0 (so t_1 = 1)
    y = theta + (t_r - 1) / t_{r+1} * (theta - theta_prev)

evaluates the gradient there, folds it into exponential first/second
moments, and applies the bias-corrected update

    theta = y - eta * sqrt(1 - beta2^r) / (1 - beta1^r) * m / sqrt(v + eps).

With eta = 1 the first step has unit magnitude per coordinate whenever
eps << (1 - beta2) * g^2, so a global scale eta is exposed (defaults:
1e-3 for the critic, 1e-4 for the actor).

The module also ships validators run against convex quadratics: the
L-smooth quadratic upper bound, its closed-form minimizer, and the
O(1/r^2) suboptimality bound of the classic 1/L Nesterov iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

__all__ = [
    "OptState",
    "QuadraticProblem",
    "next_momentum",
    "auxiliary_point",
    "update_moments",
    "apply_update",
    "accelerated_step",
    "random_psd_problem",
    "verify_majorizer",
    "optimal_majorizer_step",
    "nag_bound_check",
]


@dataclass(frozen=True)
class OptState:
    """Optimizer state for one parameter vector."""

    theta_prev: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: float = 0.0
    r: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    eta: float = 1e-3

    @classmethod
    def fresh(cls, theta: np.ndarray, eta: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> "OptState":
        z = np.zeros_like(theta)
        return cls(theta_prev=theta.copy(), m=z.copy(), v=z.copy(),
                   t=0.0, r=0, beta1=beta1, beta2=beta2, eps=eps, eta=eta)


def next_momentum(t: float) -> float:
    """Momentum-scale recurrence (1 + sqrt(1 + 4 t^2)) / 2; strictly increasing."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))


def auxiliary_point(theta: np.ndarray, theta_prev: np.ndarray, t: float,
                    t_next: float) -> np.ndarray:
    """Extrapolated look-ahead point y = theta + (t-1)/t_next * (theta - theta_prev)."""
    if theta.shape != theta_prev.shape:
        raise ValueError("theta and theta_prev must have equal length")
    return theta + ((t - 1.0) / t_next) * (theta - theta_prev)


def update_moments(m, v, g, beta1: float, beta2: float):
    """m' = b1*m + (1-b1)*g,  v' = b2*v + (1-b2)*g^2 (elementwise)."""
    return beta1 * m + (1.0 - beta1) * g, beta2 * v + (1.0 - beta2) * g * g


def apply_update(y, m, v, beta1: float, beta2: float, r: int, eps: float, eta: float):
    """Bias-corrected step from the auxiliary point (r >= 1, eps inside the sqrt)."""
    if r < 1:
        raise ValueError(f"step index r must be >= 1, got {r}")
    correction = np.sqrt(1.0 - beta2**r) / (1.0 - beta1**r)
    return y - eta * correction * m / np.sqrt(v + eps)


def accelerated_step(
    state: OptState, theta: np.ndarray, grad_fn: Callable[[np.ndarray], np.ndarray]
) -> tuple[np.ndarray, OptState]:
    """One optimizer step; grad_fn is evaluated at the auxiliary point.

    Returns the new parameters and updated state; both inputs are left
    untouched so steps are deterministic and replayable.
    """
    t_next = next_momentum(state.t)
    y = auxiliary_point(theta, state.theta_prev, state.t, t_next)
    g = np.asarray(grad_fn(y), dtype=float)
    if g.shape != theta.shape:
        raise ValueError("gradient shape does not match parameters")
    if not np.all(np.isfinite(g)):
        raise FloatingPointError(f"non-finite gradient at step {state.r + 1}")
    m, v = update_moments(state.m, state.v, g, state.beta1, state.beta2)
    r = state.r + 1
    theta_new = apply_update(y, m, v, state.beta1, state.beta2, r, state.eps, state.eta)
    new_state = replace(state, theta_prev=theta.copy(), m=m, v=v, t=t_next, r=r)
    return theta_new, new_state


# ---------------------------------------------------------------------------
# Quadratic validators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticProblem:
    """f(theta) = 1/2 theta^T A theta - b^T theta with A symmetric PSD.

    optimum solves A theta* = b; lmax is the largest eigenvalue of A (the
    smoothness constant of f).
    """

    matrix: np.ndarray
    offset: np.ndarray
    optimum: np.ndarray
    lmax: float

    def value(self, theta: np.ndarray) -> float:
        return float(0.5 * theta @ self.matrix @ theta - self.offset @ theta)

    def grad(self, theta: np.ndarray) -> np.ndarray:
        return self.matrix @ theta - self.offset

    @property
    def value_min(self) -> float:
        return self.value(self.optimum)


def random_psd_problem(dim: int, rng: np.random.Generator,
                       lmax: float | None = None) -> QuadraticProblem:
    """Random PSD quadratic with a known optimum and exact largest eigenvalue."""
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    top = lmax if lmax is not None else float(rng.uniform(1.0, 10.0))
    eigs = rng.uniform(0.0, top, size=dim)
    eigs[rng.integers(dim)] = top
    a = basis @ np.diag(eigs) @ basis.T
    a = 0.5 * (a + a.T)
    optimum = rng.standard_normal(dim)
    return QuadraticProblem(matrix=a, offset=a @ optimum, optimum=optimum, lmax=top)


def verify_majorizer(problem: QuadraticProblem, y: np.ndarray, theta: np.ndarray,
                     slack: float = 1e-9) -> bool:
    """Check f(theta) <= f(y) + grad(y)^T (theta-y) + L/2 ||theta-y||^2 + slack."""
    d = theta - y
    bound = problem.value(y) + problem.grad(y) @ d + 0.5 * problem.lmax * (d @ d)
    return problem.value(theta) <= bound + slack


def majorizer_value(problem: QuadraticProblem, y: np.ndarray,
                    theta: np.ndarray) -> float:
    """The quadratic upper-bound surrogate evaluated at theta."""
    d = theta - y
    return problem.value(y) + float(problem.grad(y) @ d) + 0.5 * problem.lmax * float(d @ d)


def optimal_majorizer_step(problem: QuadraticProblem, y: np.ndarray) -> np.ndarray:
    """Minimizer of the quadratic upper bound: theta = y - grad(y) / L."""
    if problem.lmax <= 0:
        raise ValueError("smoothness constant L must be positive")
    return y - problem.grad(y) / problem.lmax


def nag_bound_check(problem: QuadraticProblem, theta0: np.ndarray, r_max: int,
                    slack: float = 1e-9) -> np.ndarray:
    """Run the classic 1/L Nesterov iteration and check, for every r <= r_max,

        f(theta_r) - f(theta*) <= 2 L ||theta0 - theta*||^2 / (r+1)^2 + slack.

    Returns the boolean check per iterate.
    """
    if problem.lmax <= 0:
        raise ValueError("smoothness constant L must be positive")
    gap_scale = 2.0 * problem.lmax * float(
        (theta0 - problem.optimum) @ (theta0 - problem.optimum)
    )
    f_star = problem.value_min
    theta_prev = theta0.copy()
    theta = theta0.copy()
    t = 0.0
    checks = np.empty(r_max + 1, dtype=bool)
    for r in range(r_max + 1):
        checks[r] = problem.value(theta) - f_star <= gap_scale / (r + 1) ** 2 + slack
        if r == r_max:
            break
        t_next = next_momentum(t)
        y = auxiliary_point(theta, theta_prev, t, t_next)
        theta_prev, theta = theta, y - problem.grad(y) / problem.lmax
        t = t_next
    return checks
