"""Minimal feed-forward networks stored as flat parameter vectors.

Keeping all weights in one flat float64 vector lets the optimizer treat a
network as a single point in parameter space and makes finite-difference
gradient checks exact to numerical precision. Hidden layers use tanh; the
output layer is linear or sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MlpSpec", "MlpParams", "n_params", "init_mlp", "mlp_forward", "mlp_backward"]


@dataclass(frozen=True)
class MlpSpec:
    """Layer sizes (input, hidden..., output) and the output activation tag."""

    sizes: tuple[int, ...]
    output_activation: str = "linear"  # "linear" or "sigmoid"

    def __post_init__(self) -> None:
        if len(self.sizes) < 2 or any(s < 1 for s in self.sizes):
            raise ValueError(f"invalid layer sizes {self.sizes}")
        if self.output_activation not in ("linear", "sigmoid"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")


@dataclass
class MlpParams:
    """Flat parameter vector plus its shape metadata."""

    spec: MlpSpec
    theta: np.ndarray

    def __post_init__(self) -> None:
        expected = n_params(self.spec)
        if self.theta.shape != (expected,):
            raise ValueError(
                f"parameter vector has length {self.theta.shape}, expected ({expected},)"
            )
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("parameters must be finite")


def n_params(spec: MlpSpec) -> int:
    return sum(
        spec.sizes[i] * spec.sizes[i + 1] + spec.sizes[i + 1]
        for i in range(len(spec.sizes) - 1)
    )


def init_mlp(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Gaussian fan-in scaled weights, zero biases."""
    chunks = []
    for i in range(len(spec.sizes) - 1):
        fan_in, fan_out = spec.sizes[i], spec.sizes[i + 1]
        chunks.append(rng.standard_normal(fan_in * fan_out) / np.sqrt(fan_in))
        chunks.append(np.zeros(fan_out))
    return MlpParams(spec=spec, theta=np.concatenate(chunks))


def _layers(params: MlpParams):
    """Views (no copies) of (W, b) per layer into the flat vector."""
    sizes = params.spec.sizes
    theta = params.theta
    offset = 0
    out = []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        w = theta[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = theta[offset:offset + fan_out]
        offset += fan_out
        out.append((w, b))
    return out


def mlp_forward(params: MlpParams, x: np.ndarray, return_cache: bool = False):
    """Batched forward pass; x has shape (batch, sizes[0]).

    With return_cache=True also returns the per-layer activations needed by
    mlp_backward.
    """
    if x.ndim != 2 or x.shape[1] != params.spec.sizes[0]:
        raise ValueError(
            f"input shape {x.shape} does not match network input {params.spec.sizes[0]}"
        )
    layers = _layers(params)
    activations = [x]
    a = x
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        if i < len(layers) - 1:
            a = np.tanh(z)
        elif params.spec.output_activation == "sigmoid":
            # exp overflow at saturated preactivations resolves to exactly 0
            with np.errstate(over="ignore"):
                a = 1.0 / (1.0 + np.exp(-z))
        else:
            a = z
        activations.append(a)
    if return_cache:
        return a, activations
    return a


def mlp_backward(params: MlpParams, cache: list[np.ndarray], dy: np.ndarray) -> np.ndarray:
    """Flat parameter gradient of sum(output * dy) given a forward cache.

    dy has the output's shape; batch contributions are summed.
    """
    layers = _layers(params)
    out = cache[-1]
    if params.spec.output_activation == "sigmoid":
        dz = dy * out * (1.0 - out)
    else:
        dz = dy
    grad = np.empty_like(params.theta)
    offset = len(params.theta)
    for i in range(len(layers) - 1, -1, -1):
        w, b = layers[i]
        a_prev = cache[i]
        db = dz.sum(axis=0)
        dw = a_prev.T @ dz
        offset -= b.size
        grad[offset:offset + b.size] = db
        offset -= w.size
        grad[offset:offset + w.size] = dw.ravel()
        if i > 0:
            da = dz @ w.T
            dz = da * (1.0 - cache[i] * cache[i])
    return grad
