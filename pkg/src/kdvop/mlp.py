"""Dense networks with swish/linear layers and hand-written backprop."""

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths [in, h1, ..., out] and one activation tag per layer."""

    widths: tuple
    activations: tuple

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ValueError("need at least one layer")
        if any(w <= 0 for w in self.widths):
            raise ValueError("layer widths must be positive")
        if len(self.activations) != len(self.widths) - 1:
            raise ValueError("one activation per layer required")
        if any(a not in ("swish", "linear") for a in self.activations):
            raise ValueError("activations must be 'swish' or 'linear'")

    @property
    def n_layers(self):
        return len(self.widths) - 1


def glorot_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_mlp(spec: MlpSpec, rng) -> list:
    """Glorot-uniform weights, zero biases; returns [(W, b), ...]."""
    return [
        (glorot_uniform(rng, spec.widths[i], spec.widths[i + 1]), np.zeros(spec.widths[i + 1]))
        for i in range(spec.n_layers)
    ]


def mlp_forward(weights: list, spec: MlpSpec, x: np.ndarray):
    """Returns (output, cache) for a batch x of shape [batch, widths[0]]."""
    if x.ndim != 2 or x.shape[1] != spec.widths[0]:
        raise ValueError(f"input width {x.shape} does not match spec {spec.widths[0]}")
    a = x
    cache = []
    for (w, b), act in zip(weights, spec.activations):
        z = a @ w + b
        if act == "swish":
            y, dy = kernels.swish(z)
        else:
            y, dy = z, None
        cache.append((a, dy))
        a = y
    return a, cache


def mlp_backward(weights: list, cache: list, dout: np.ndarray):
    """Returns (grads aligned with weights, d_input)."""
    grads = [None] * len(weights)
    da = dout
    for i in range(len(weights) - 1, -1, -1):
        a_in, dy = cache[i]
        dz = da * dy if dy is not None else da
        grads[i] = (a_in.T @ dz, dz.sum(axis=0))
        da = dz @ weights[i][0].T
    return grads, da


def count_mlp_parameters(weights: list) -> int:
    return int(sum(w.size + b.size for w, b in weights))
