"""Model wrappers tying network parameters to their scalers and horizon.

Every model exposes ``predict(u0) -> [batch, horizon, nx]`` in physical
units; training code additionally uses the normalized-space forward/backward
pairs. DeepONet branch inputs and outputs use standard scaling and trunk
coordinates min-max scaling; FNO runs unscaled.
"""

import numpy as np

from . import deeponet as don
from . import fno as fno_mod
from . import rnn_head as head_mod
from .kdv import GridSpec
from .normalize import Normalizer, fit_normalizer

OPERATORS = ("deeponet", "fno")


class OperatorModel:
    def __init__(self, kind, spec, params, grid, horizon, scalers=None):
        if kind not in OPERATORS:
            raise ValueError(f"operator kind must be one of {OPERATORS}")
        self.kind = kind
        self.spec = spec
        self.params = params
        self.grid = grid
        self.horizon = horizon
        self.scalers = scalers or {
            "in": Normalizer("none"),
            "out": Normalizer("none"),
            "coords": Normalizer("none"),
        }
        if kind == "deeponet":
            self._coords = don.make_trunk_coords(grid, horizon)

    @property
    def nx(self):
        return self.grid.nx

    def fit_scalers(self, u0_train, targets_train):
        """DeepONet: standard on branch inputs/outputs, min-max on coords."""
        if self.kind == "fno":
            return  # inputs and outputs stay unscaled
        n = len(u0_train)
        self.scalers["in"] = fit_normalizer("standard", u0_train)
        self.scalers["out"] = fit_normalizer("standard", targets_train.reshape(n, -1))
        self.scalers["coords"] = fit_normalizer("minmax", self._coords)

    def forward_normalized(self, u0):
        """Operator output in its training space: [batch, horizon, nx]."""
        if self.kind == "deeponet":
            u0n = self.scalers["in"].apply(u0)
            coords = self.scalers["coords"].apply(self._coords)
            out, cache = don.deeponet_forward(self.params, self.spec, u0n, coords)
            return out.reshape(len(u0), self.horizon, self.nx), cache
        out, cache = fno_mod.fno_forward(self.params, self.spec, u0, self.grid, self.horizon)
        return out, cache

    def backward(self, cache, dout):
        """dout is in the normalized output space, [batch, horizon, nx]."""
        if self.kind == "deeponet":
            return don.deeponet_backward(cache, dout.reshape(dout.shape[0], -1))
        return fno_mod.fno_backward(self.params, self.spec, cache, dout)

    def normalize_targets(self, targets):
        if self.kind == "deeponet":
            n = len(targets)
            return self.scalers["out"].apply(targets.reshape(n, -1)).reshape(targets.shape)
        return targets

    def denormalize_output(self, out):
        if self.kind == "deeponet":
            n = len(out)
            return self.scalers["out"].invert(out.reshape(n, -1)).reshape(out.shape)
        return out

    def predict(self, u0):
        out, _ = self.forward_normalized(np.atleast_2d(u0))
        return self.denormalize_output(out)

    def state(self):
        arrays = {f"op.{k}": v for k, v in self.params.items()}
        meta = {
            "model": "operator",
            "kind": self.kind,
            "horizon": self.horizon,
            "grid": {
                "period": self.grid.period,
                "nx": self.grid.nx,
                "dt_record": self.grid.dt_record,
                "nt_record": self.grid.nt_record,
            },
            "spec": _spec_to_dict(self.kind, self.spec),
            "scalers": {},
        }
        for name, sc in self.scalers.items():
            meta["scalers"][name] = {"kind": sc.kind, "fitted_on": sc.fitted_on}
            if sc.kind != "none":
                arrays[f"norm.{name}.loc"] = np.atleast_1d(sc.loc)
                arrays[f"norm.{name}.scale"] = np.atleast_1d(sc.scale)
        return meta, arrays

    @classmethod
    def from_state(cls, meta, arrays):
        grid = GridSpec(**meta["grid"])
        kind = meta["kind"]
        spec = _spec_from_dict(kind, meta["spec"])
        params = {
            k[3:]: v for k, v in arrays.items() if k.startswith("op.")
        }
        scalers = {}
        for name, sm in meta["scalers"].items():
            scalers[name] = Normalizer(
                kind=sm["kind"],
                loc=arrays.get(f"norm.{name}.loc"),
                scale=arrays.get(f"norm.{name}.scale"),
                fitted_on=sm["fitted_on"],
            )
        return cls(kind, spec, params, grid, meta["horizon"], scalers)


class CompositeModel:
    """Operator plus recurrent head, either mode.

    two_step: the head maps physical operator predictions -> physical truth,
    through its own standard scalers. simultaneous: the head lives in the
    operator's normalized output space and the final prediction is inverted
    with the operator's output scaler.
    """

    def __init__(self, operator, head_spec, head_params, mode, head_scalers=None):
        self.operator = operator
        self.head_spec = head_spec
        self.head_params = head_params
        self.mode = mode
        self.head_scalers = head_scalers or {
            "in": Normalizer("none"),
            "out": Normalizer("none"),
        }

    @property
    def horizon(self):
        return self.operator.horizon

    @property
    def grid(self):
        return self.operator.grid

    def predict(self, u0):
        u0 = np.atleast_2d(u0)
        if self.mode == "two_step":
            op_out = self.operator.predict(u0)
            seq = self.head_scalers["in"].apply(op_out)
            out, _ = head_mod.head_forward(self.head_spec, self.head_params, seq)
            return self.head_scalers["out"].invert(out)
        op_out, _ = self.operator.forward_normalized(u0)
        out, _ = head_mod.head_forward(self.head_spec, self.head_params, op_out)
        return self.operator.denormalize_output(out)

    def state(self):
        meta, arrays = self.operator.state()
        meta["model"] = "composite"
        meta["mode"] = self.mode
        meta["head"] = {
            "cell": self.head_spec.cell,
            "hidden": self.head_spec.hidden,
            "out_width": self.head_spec.out_width,
        }
        meta["head_scalers"] = {}
        for name, sc in self.head_scalers.items():
            meta["head_scalers"][name] = {"kind": sc.kind, "fitted_on": sc.fitted_on}
            if sc.kind != "none":
                arrays[f"hnorm.{name}.loc"] = sc.loc
                arrays[f"hnorm.{name}.scale"] = sc.scale
        for k, v in self.head_params.items():
            arrays[f"head.{k}"] = v
        return meta, arrays

    @classmethod
    def from_state(cls, meta, arrays):
        operator = OperatorModel.from_state(meta, arrays)
        head_spec = head_mod.HeadSpec(**meta["head"])
        head_params = {k[5:]: v for k, v in arrays.items() if k.startswith("head.")}
        scalers = {}
        for name, sm in meta["head_scalers"].items():
            scalers[name] = Normalizer(
                kind=sm["kind"],
                loc=arrays.get(f"hnorm.{name}.loc"),
                scale=arrays.get(f"hnorm.{name}.scale"),
                fitted_on=sm["fitted_on"],
            )
        return cls(operator, head_spec, head_params, meta["mode"], scalers)


def _spec_to_dict(kind, spec):
    if kind == "deeponet":
        return {
            "branch_widths": list(spec.branch.widths),
            "branch_acts": list(spec.branch.activations),
            "trunk_widths": list(spec.trunk.widths),
            "trunk_acts": list(spec.trunk.activations),
        }
    return {
        "width": spec.width,
        "n_layers": spec.n_layers,
        "modes_t": spec.modes_t,
        "modes_x": spec.modes_x,
        "pad_t": spec.pad_t,
        "pad_x": spec.pad_x,
        "in_channels": spec.in_channels,
        "proj_width": spec.proj_width,
    }


def _spec_from_dict(kind, d):
    if kind == "deeponet":
        from .mlp import MlpSpec

        return don.DeepONetSpec(
            branch=MlpSpec(tuple(d["branch_widths"]), tuple(d["branch_acts"])),
            trunk=MlpSpec(tuple(d["trunk_widths"]), tuple(d["trunk_acts"])),
        )
    return fno_mod.FnoSpec(**d)


def model_from_state(meta, arrays):
    if meta["model"] == "composite":
        return CompositeModel.from_state(meta, arrays)
    return OperatorModel.from_state(meta, arrays)
