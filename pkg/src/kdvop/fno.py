"""FNO-2D over the space-time grid, with hand-written backprop.

The spectral convolution keeps the low space-time Fourier modes (both
t-frequency signs, rfft-style half spectrum in x) and multiplies them by
learned complex weights. Because only a small mode block is ever touched,
both transform directions are evaluated as partial-DFT matrix products
instead of full FFTs; this is exactly equivalent to the usual
rfft2 -> multiply -> irfft2 formulation (the tests check it against a
dense-DFT oracle and against numpy's FFT) and is much faster on the
odd-sized padded grids used here.

Internally activations are channels-last [batch, T, X, C]; the public
``spectral_conv2d`` accepts the conventional channels-first layout.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels


@dataclass(frozen=True)
class FnoSpec:
    width: int = 64
    n_layers: int = 4
    modes_t: int = 12
    modes_x: int = 12
    pad_t: int = 9
    pad_x: int = 9
    in_channels: int = 3
    proj_width: int = 128

    def __post_init__(self):
        if self.width <= 0 or self.n_layers < 1 or self.proj_width <= 0:
            raise ValueError("width, n_layers and proj_width must be positive")
        if self.modes_t < 1 or self.modes_x < 1:
            raise ValueError("mode counts must be positive")


def init_fno(spec: FnoSpec, rng) -> dict:
    """Affine layers Glorot-uniform; spectral weights uniform scaled by 1/width^2."""
    from .mlp import glorot_uniform

    params = {
        "lift.w": glorot_uniform(rng, spec.in_channels, spec.width),
        "lift.b": np.zeros(spec.width),
    }
    scale = 1.0 / (spec.width * spec.width)
    for i in range(spec.n_layers):
        params[f"fourier{i}.spec"] = scale * rng.uniform(
            0.0, 1.0, size=(2, spec.width, spec.width, spec.modes_t, spec.modes_x, 2)
        )
        params[f"fourier{i}.skip_w"] = glorot_uniform(rng, spec.width, spec.width)
        params[f"fourier{i}.skip_b"] = np.zeros(spec.width)
    params["proj1.w"] = glorot_uniform(rng, spec.width, spec.proj_width)
    params["proj1.b"] = np.zeros(spec.proj_width)
    params["proj2.w"] = glorot_uniform(rng, spec.proj_width, 1)
    params["proj2.b"] = np.zeros(1)
    return params


def count_parameters(params: dict) -> int:
    return int(sum(np.asarray(v).size for v in params.values()))


def table_visible_count(spec: FnoSpec) -> int:
    """Lift + per-layer skip convolutions + projections (spectral weights excluded)."""
    lift = spec.in_channels * spec.width + spec.width
    skip = spec.n_layers * (spec.width * spec.width + spec.width)
    proj = (spec.width * spec.proj_width + spec.proj_width) + (spec.proj_width + 1)
    return lift + skip + proj


@lru_cache(maxsize=16)
def _plan(T: int, X: int, mt: int, mx: int):
    """Partial-DFT matrices for the retained mode block on a T-by-X grid."""
    if 2 * mt > T:
        raise ValueError(f"modes_t={mt} does not fit {T} time frequencies")
    if mx > X // 2:
        raise ValueError(f"modes_x={mx} does not fit {X} spatial points")
    t = np.arange(T)
    x = np.arange(X)
    p = np.concatenate([np.arange(mt), np.arange(T - mt, T)])
    q = np.arange(mx)
    ex_f = np.exp(-2j * np.pi * np.outer(x, q) / X)  # [X, mx]
    et_f = np.exp(-2j * np.pi * np.outer(p, t) / T)  # [2mt, T]
    c = np.where(q == 0, 1.0, 2.0)  # conjugate-mirror column weights
    return ex_f, et_f, c


def _partial_dft(v, mt, mx):
    """DFT of real v [B, T, X, C] restricted to the retained modes -> [B, 2mt, mx, C]."""
    B, T, X, C = v.shape
    ex_f, et_f, _ = _plan(T, X, mt, mx)
    # contract x: [B,T,X,C] -> [B,T,mx,C]
    tmp = np.tensordot(v, ex_f.real, axes=([2], [0])) + 1j * np.tensordot(
        v, ex_f.imag, axes=([2], [0])
    )  # [B,T,C,mx]
    # contract t: [2mt,T] @ [B,T,C,mx]
    out = np.tensordot(et_f, tmp, axes=([1], [1]))  # [2mt, B, C, mx]
    return np.ascontiguousarray(np.transpose(out, (1, 0, 3, 2)))  # [B, 2mt, mx, C]


def _expand_modes(h, T, X, weighted: bool):
    """Adjoint-style expansion of mode block h [B, 2mt, mx, C] to a real field.

    weighted=True applies the mirror column weights and 1/(T*X) (the inverse
    transform); weighted=False is the bare adjoint used in backprop.
    """
    B, P2, mx, C = h.shape
    ex_f, et_f, c = _plan(T, X, P2 // 2, mx)
    if weighted:
        h = h * (c / (T * X))[None, None, :, None]
    # expand t: conj(et_f).T [T, 2mt] @ h
    z = np.tensordot(np.conj(et_f), h, axes=([0], [1]))  # [T, B, mx, C]
    # expand x with a real result: Re(z @ conj(ex_f).T)
    ex_i = np.conj(ex_f).T  # [mx, X]
    y = np.tensordot(z.real, ex_i.real, axes=([2], [0])) - np.tensordot(
        z.imag, ex_i.imag, axes=([2], [0])
    )  # [T, B, C, X]
    return np.ascontiguousarray(np.transpose(y, (1, 0, 3, 2)))  # [B, T, X, C]


def _as_complex(w):
    return w[..., 0] + 1j * w[..., 1]


def _mode_multiply(vb, w):
    """Per-mode channel contraction: vb [B,2mt,mx,C] x w [2,C,O,mt,mx] -> [B,2mt,mx,O]."""
    mt = w.shape[3]
    top = np.einsum("bmni,iomn->bmno", vb[:, :mt], w[0])
    bot = np.einsum("bmni,iomn->bmno", vb[:, mt:], w[1])
    return np.concatenate([top, bot], axis=1)


def _spectral_forward(v, w_spec, mt, mx):
    """Channels-last spectral convolution; returns (output, mode cache)."""
    B, T, X, C = v.shape
    vb = _partial_dft(v, mt, mx)
    out_modes = _mode_multiply(vb, _as_complex(w_spec))
    return _expand_modes(out_modes, T, X, weighted=True), vb


def _spectral_backward(g, vb, w_spec, mt, mx):
    """Gradients of the spectral convolution given upstream g [B,T,X,O]."""
    B, T, X, O = g.shape
    _, _, c = _plan(T, X, mt, mx)
    gb = _partial_dft(g, mt, mx) * (c / (T * X))[None, None, :, None]
    w = _as_complex(w_spec)
    dw = np.empty_like(w)
    dw[0] = np.einsum("bmni,bmno->iomn", np.conj(vb[:, :mt]), gb[:, :mt])
    dw[1] = np.einsum("bmni,bmno->iomn", np.conj(vb[:, mt:]), gb[:, mt:])
    dvb_top = np.einsum("bmno,iomn->bmni", gb[:, :mt], np.conj(w[0]))
    dvb_bot = np.einsum("bmno,iomn->bmni", gb[:, mt:], np.conj(w[1]))
    dv = _expand_modes(np.concatenate([dvb_top, dvb_bot], axis=1), T, X, weighted=False)
    dw_pair = np.stack([dw.real, dw.imag], axis=-1)
    return dw_pair, dv


def spectral_conv2d(v: np.ndarray, w_spec: np.ndarray) -> np.ndarray:
    """Public layout [batch, width, T, X]: retained low modes scaled by the
    complex weights [2, in, out, modes_t, modes_x(, 2)], everything else zero."""
    if w_spec.shape[-1] == 2 and w_spec.ndim == 6:
        w = w_spec
    else:
        w = np.stack([np.real(w_spec), np.imag(w_spec)], axis=-1)
    mt, mx = w.shape[3], w.shape[4]
    vl = np.ascontiguousarray(np.transpose(v, (0, 2, 3, 1)))
    out, _ = _spectral_forward(vl, w, mt, mx)
    return np.ascontiguousarray(np.transpose(out, (0, 3, 1, 2)))


def fourier_layer(v: np.ndarray, w_spec, skip_w, skip_b) -> np.ndarray:
    """Public layout [batch, width, T, X]: GELU(spectral(v) + 1x1 conv(v))."""
    vl = np.ascontiguousarray(np.transpose(v, (0, 2, 3, 1)))
    out, _ = _layer_forward(vl, w_spec, skip_w, skip_b)
    return np.ascontiguousarray(np.transpose(out, (0, 3, 1, 2)))


def _layer_forward(v, w_spec, skip_w, skip_b):
    if w_spec.shape[-1] == 2 and w_spec.ndim == 6:
        w = w_spec
    else:
        w = np.stack([np.real(w_spec), np.imag(w_spec)], axis=-1)
    mt, mx = w.shape[3], w.shape[4]
    s, vb = _spectral_forward(v, w, mt, mx)
    z = s + v @ skip_w + skip_b
    y, dg = kernels.gelu(z)
    return y, (v, vb, dg)


def _layer_backward(gout, cache, w_spec, skip_w):
    v, vb, dg = cache
    mt, mx = w_spec.shape[3], w_spec.shape[4]
    dz = gout * dg
    dskip_w = np.tensordot(v, dz, axes=([0, 1, 2], [0, 1, 2]))
    dskip_b = dz.sum(axis=(0, 1, 2))
    dw_spec, dv = _spectral_backward(dz, vb, w_spec, mt, mx)
    dv += dz @ skip_w.T
    return dv, dw_spec, dskip_w, dskip_b


def build_fno_input(u0: np.ndarray, grid, horizon: int | None = None) -> np.ndarray:
    """Replicated initial condition plus t and x coordinate channels in [0, 1]."""
    u0 = np.atleast_2d(np.asarray(u0, dtype=np.float64))
    if not np.all(np.isfinite(u0)):
        raise ValueError("initial condition must be finite")
    nt = horizon if horizon is not None else grid.nt_record
    b, nx = u0.shape
    out = np.empty((b, nt, nx, 3))
    out[..., 0] = u0[:, None, :]
    tc = np.arange(nt) / max(nt - 1, 1)
    xc = np.arange(nx) / max(nx - 1, 1)
    out[..., 1] = tc[None, :, None]
    out[..., 2] = xc[None, None, :]
    return out


def fno_forward(params: dict, spec: FnoSpec, u0: np.ndarray, grid, horizon=None):
    """Full-horizon field [batch, nt, nx]; inputs and outputs are unscaled.

    Returns (output, cache) where the cache feeds :func:`fno_backward`.
    """
    xin = build_fno_input(u0, grid, horizon)
    b, nt, nx, _ = xin.shape
    v = xin @ params["lift.w"] + params["lift.b"]
    v = np.pad(v, ((0, 0), (0, spec.pad_t), (0, spec.pad_x), (0, 0)))
    layer_caches = []
    for i in range(spec.n_layers):
        v, cache = _layer_forward(
            v, params[f"fourier{i}.spec"], params[f"fourier{i}.skip_w"], params[f"fourier{i}.skip_b"]
        )
        layer_caches.append(cache)
    v = v[:, :nt, :nx, :]
    z1 = v @ params["proj1.w"] + params["proj1.b"]
    a1, dg1 = kernels.gelu(z1)
    out = a1 @ params["proj2.w"] + params["proj2.b"]
    out = out[..., 0]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite activations in FNO forward pass")
    return out, (xin, layer_caches, v, a1, dg1)


def fno_backward(params: dict, spec: FnoSpec, cache, dout: np.ndarray) -> dict:
    xin, layer_caches, v_crop, a1, dg1 = cache
    b, nt, nx, _ = xin.shape
    grads = {}
    g = dout[..., None]  # [B, nt, nx, 1]
    grads["proj2.w"] = np.tensordot(a1, g, axes=([0, 1, 2], [0, 1, 2]))
    grads["proj2.b"] = g.sum(axis=(0, 1, 2))
    g = (g @ params["proj2.w"].T) * dg1
    grads["proj1.w"] = np.tensordot(v_crop, g, axes=([0, 1, 2], [0, 1, 2]))
    grads["proj1.b"] = g.sum(axis=(0, 1, 2))
    g = g @ params["proj1.w"].T
    gp = np.zeros((b, nt + spec.pad_t, nx + spec.pad_x, spec.width))
    gp[:, :nt, :nx, :] = g
    g = gp
    for i in range(spec.n_layers - 1, -1, -1):
        g, dw_spec, dskip_w, dskip_b = _layer_backward(
            g, layer_caches[i], params[f"fourier{i}.spec"], params[f"fourier{i}.skip_w"]
        )
        grads[f"fourier{i}.spec"] = dw_spec
        grads[f"fourier{i}.skip_w"] = dskip_w
        grads[f"fourier{i}.skip_b"] = dskip_b
    g = g[:, : xin.shape[1], : xin.shape[2], :]
    grads["lift.w"] = np.tensordot(xin, g, axes=([0, 1, 2], [0, 1, 2]))
    grads["lift.b"] = g.sum(axis=(0, 1, 2))
    return grads
