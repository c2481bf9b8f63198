"""Recurrent sequence head: cell over time-major operator outputs, then a
per-timestep affine projection back to the spatial width.

Parameter counts at (nx=50, hidden=200): simple 60,250; GRU 161,250
(double-bias formulation, the only one matching the 151,200 cell count);
LSTM 210,850 (single bias per gate).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .mlp import glorot_uniform

CELLS = ("simple", "gru", "lstm")
_GATES = {"simple": 1, "gru": 3, "lstm": 4}


@dataclass(frozen=True)
class HeadSpec:
    cell: str = "lstm"
    hidden: int = 200
    out_width: int = 50

    def __post_init__(self):
        if self.cell not in CELLS:
            raise ValueError(f"cell must be one of {CELLS}")
        if self.hidden <= 0 or self.out_width <= 0:
            raise ValueError("hidden and out_width must be positive")


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def init_head(spec: HeadSpec, rng) -> dict:
    """Glorot input weights, orthogonal recurrent blocks, zero biases
    (LSTM forget bias starts at 1)."""
    h, nx, g = spec.hidden, spec.out_width, _GATES[spec.cell]
    params = {
        "wx": glorot_uniform(rng, nx, g * h),
        "wh": np.concatenate([_orthogonal(rng, h) for _ in range(g)], axis=1),
    }
    if spec.cell == "gru":
        params["b_in"] = np.zeros(3 * h)
        params["b_rec"] = np.zeros(3 * h)
    else:
        b = np.zeros(g * h)
        if spec.cell == "lstm":
            b[h : 2 * h] = 1.0
        params["b"] = b
    params["proj.w"] = glorot_uniform(rng, h, nx)
    params["proj.b"] = np.zeros(nx)
    return params


def head_parameter_count(spec: HeadSpec) -> int:
    h, nx, g = spec.hidden, spec.out_width, _GATES[spec.cell]
    biases = 2 * g * h if spec.cell == "gru" else g * h
    return g * h * (nx + h) + biases + h * nx + nx


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def cell_step(spec: HeadSpec, params: dict, x_t, h_prev, c_prev=None):
    """One recurrence step in plain numpy (reference for the fused kernels).

    Returns h_t for simple/gru cells, (h_t, c_t) for lstm.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    one = x_t.ndim == 1
    x_t = np.atleast_2d(x_t)
    h_prev = np.atleast_2d(h_prev)
    h = spec.hidden
    if spec.cell == "simple":
        out = np.tanh(x_t @ params["wx"] + h_prev @ params["wh"] + params["b"])
        return out[0] if one else out
    if spec.cell == "gru":
        gi = x_t @ params["wx"] + params["b_in"]
        gh = h_prev @ params["wh"] + params["b_rec"]
        r = _sigmoid(gi[:, :h] + gh[:, :h])
        z = _sigmoid(gi[:, h : 2 * h] + gh[:, h : 2 * h])
        n = np.tanh(gi[:, 2 * h :] + r * gh[:, 2 * h :])
        out = (1.0 - z) * n + z * h_prev
        return out[0] if one else out
    c_prev = np.atleast_2d(c_prev)
    pre = x_t @ params["wx"] + h_prev @ params["wh"] + params["b"]
    i = _sigmoid(pre[:, :h])
    f = _sigmoid(pre[:, h : 2 * h])
    g = np.tanh(pre[:, 2 * h : 3 * h])
    o = _sigmoid(pre[:, 3 * h :])
    c = f * c_prev + i * g
    h_t = o * np.tanh(c)
    return (h_t[0], c[0]) if one else (h_t, c)


def reshape_sequence(flat: np.ndarray, nt: int, nx: int) -> np.ndarray:
    """[batch, nt*nx] -> [batch, nt, nx]; time-major ordering, bijective."""
    flat = np.asarray(flat)
    if flat.shape[-1] != nt * nx:
        raise ValueError(f"cannot reshape width {flat.shape[-1]} into {nt}x{nx}")
    return flat.reshape(flat.shape[0], nt, nx)


def flatten_sequence(seq: np.ndarray) -> np.ndarray:
    seq = np.asarray(seq)
    return seq.reshape(seq.shape[0], -1)


def head_forward(spec: HeadSpec, params: dict, seq: np.ndarray):
    """Run the cell over seq [batch, nt, nx] from zero initial state and
    project every hidden state; returns (out [batch, nt, nx], cache)."""
    seq = np.asarray(seq, dtype=np.float64)
    b, nt, nx = seq.shape
    xs = np.ascontiguousarray(np.transpose(seq, (1, 0, 2)))
    if spec.cell == "simple":
        h_all = kernels.rnn_forward(xs, params["wx"], params["wh"], params["b"])
        cache = (xs, h_all)
    elif spec.cell == "gru":
        h_all, gates, hnrec = kernels.gru_forward(
            xs, params["wx"], params["wh"], params["b_in"], params["b_rec"]
        )
        cache = (xs, h_all, gates, hnrec)
    else:
        h_all, c_all, gates, tanh_c = kernels.lstm_forward(
            xs, params["wx"], params["wh"], params["b"]
        )
        cache = (xs, h_all, c_all, gates, tanh_c)
    h_seq = cache[1][1:]
    if not np.all(np.isfinite(h_seq)):
        bad = int(np.nonzero(~np.all(np.isfinite(h_seq), axis=(1, 2)))[0][0])
        raise FloatingPointError(f"non-finite hidden state at timestep {bad}")
    out = h_seq.reshape(nt * b, spec.hidden) @ params["proj.w"] + params["proj.b"]
    out = np.transpose(out.reshape(nt, b, nx), (1, 0, 2))
    return np.ascontiguousarray(out), cache


def head_backward(spec: HeadSpec, params: dict, cache, dout: np.ndarray):
    """Returns (grads dict, d_seq [batch, nt, nx])."""
    b, nt, nx = dout.shape
    do = np.ascontiguousarray(np.transpose(dout, (1, 0, 2)))  # time-major
    h_seq = cache[1][1:]
    grads = {
        "proj.w": h_seq.reshape(nt * b, spec.hidden).T @ do.reshape(nt * b, nx),
        "proj.b": do.sum(axis=(0, 1)),
    }
    dh_out = np.ascontiguousarray(
        (do.reshape(nt * b, nx) @ params["proj.w"].T).reshape(nt, b, spec.hidden)
    )
    if spec.cell == "simple":
        xs, h_all = cache
        dwx, dwh, db, dx = kernels.rnn_backward(xs, h_all, params["wx"], params["wh"], dh_out)
        grads.update({"wx": dwx, "wh": dwh, "b": db})
    elif spec.cell == "gru":
        xs, h_all, gates, hnrec = cache
        dwx, dwh, dbi, dbr, dx = kernels.gru_backward(
            xs, h_all, gates, hnrec, params["wx"], params["wh"], dh_out
        )
        grads.update({"wx": dwx, "wh": dwh, "b_in": dbi, "b_rec": dbr})
    else:
        xs, h_all, c_all, gates, tanh_c = cache
        dwx, dwh, db, dx = kernels.lstm_backward(
            xs, h_all, c_all, gates, tanh_c, params["wx"], params["wh"], dh_out
        )
        grads.update({"wx": dwx, "wh": dwh, "b": db})
    return grads, np.ascontiguousarray(np.transpose(dx, (1, 0, 2)))
