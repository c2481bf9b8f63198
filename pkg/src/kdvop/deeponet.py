"""Branch/trunk operator network merged by Einstein summation (no merge bias).

Default layer tables give exactly 547,950 branch and 380,750 trunk
parameters with a shared latent width of 300.
"""

from dataclasses import dataclass, field

import numpy as np

from .mlp import MlpSpec, count_mlp_parameters, init_mlp, mlp_backward, mlp_forward


def branch_spec(nx: int = 50) -> MlpSpec:
    return MlpSpec(
        widths=(nx, 150, 250, 450, 380, 320, 300),
        activations=("swish",) * 5 + ("linear",),
    )


def trunk_spec() -> MlpSpec:
    return MlpSpec(
        widths=(2, 200, 220, 240, 250, 260, 280, 300),
        activations=("swish",) * 5 + ("linear", "linear"),
    )


@dataclass(frozen=True)
class DeepONetSpec:
    branch: MlpSpec = field(default_factory=branch_spec)
    trunk: MlpSpec = field(default_factory=trunk_spec)

    def __post_init__(self):
        if self.branch.widths[-1] != self.trunk.widths[-1]:
            raise ValueError("branch and trunk must share the final (latent) width")

    @property
    def latent(self):
        return self.branch.widths[-1]


def init_deeponet(spec: DeepONetSpec, rng) -> dict:
    params = {}
    for name, net in (("branch", spec.branch), ("trunk", spec.trunk)):
        for i, (w, b) in enumerate(init_mlp(net, rng)):
            params[f"{name}.{i}.w"] = w
            params[f"{name}.{i}.b"] = b
    return params


def _as_weights(params: dict, name: str, n_layers: int):
    return [(params[f"{name}.{i}.w"], params[f"{name}.{i}.b"]) for i in range(n_layers)]


def deeponet_forward(params: dict, spec: DeepONetSpec, u0: np.ndarray, coords: np.ndarray):
    """out[b, q] = sum_j branch(u0)[b, j] * trunk(coords)[q, j].

    Inputs are expected in the training module's normalized spaces.
    Returns (out [batch, n_query], cache).
    """
    bw = _as_weights(params, "branch", spec.branch.n_layers)
    tw = _as_weights(params, "trunk", spec.trunk.n_layers)
    bout, bcache = mlp_forward(bw, spec.branch, u0)
    tout, tcache = mlp_forward(tw, spec.trunk, coords)
    out = bout @ tout.T
    return out, (bout, bcache, tout, tcache, bw, tw)


def deeponet_backward(cache, dout: np.ndarray) -> dict:
    bout, bcache, tout, tcache, bw, tw = cache
    dbout = dout @ tout
    dtout = dout.T @ bout
    bgrads, _ = mlp_backward(bw, bcache, dbout)
    tgrads, _ = mlp_backward(tw, tcache, dtout)
    grads = {}
    for name, gl in (("branch", bgrads), ("trunk", tgrads)):
        for i, (gw, gb) in enumerate(gl):
            grads[f"{name}.{i}.w"] = gw
            grads[f"{name}.{i}.b"] = gb
    return grads


def count_parameters(params: dict) -> int:
    """Exact count of trainable scalars in any named parameter set."""
    return int(sum(np.asarray(v).size for v in params.values()))


def branch_parameter_count(spec: DeepONetSpec, rng=None) -> int:
    return count_mlp_parameters(init_mlp(spec.branch, np.random.default_rng(0)))


def trunk_parameter_count(spec: DeepONetSpec) -> int:
    return count_mlp_parameters(init_mlp(spec.trunk, np.random.default_rng(0)))


def make_trunk_coords(grid, horizon: int) -> np.ndarray:
    """Query coordinates [(x, t)] for t = dt..horizon*dt, time-major rows."""
    x = grid.x
    t = (np.arange(horizon) + 1) * grid.dt_record
    tt, xx = np.meshgrid(t, x, indexing="ij")
    return np.column_stack([xx.ravel(), tt.ravel()])
