"""Hot numeric kernels, each with a numba-jitted and a pure-numpy path.

The jitted path is used by default when numba imports cleanly. Set the
environment variable ``KDVOP_NUMBA=0`` (or call :func:`set_numba`) to force
the pure-numpy fallback; ``python -m kdvop.bench`` times one against the
other. Both paths compute the same formulas; results agree to roundoff,
and bit-exact reproducibility holds within a fixed path.
"""

import math
import os

import numpy as np

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but degrade gracefully
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap

    prange = range

_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715

_enabled = _HAVE_NUMBA and os.environ.get("KDVOP_NUMBA", "1").lower() not in (
    "0",
    "false",
    "off",
)


def numba_enabled() -> bool:
    return _enabled


def set_numba(flag: bool) -> None:
    """Select the kernel path at runtime (overrides the env default)."""
    global _enabled
    if flag and not _HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    _enabled = bool(flag)


# ---------------------------------------------------------------------------
# elementwise activations (value and derivative in one pass)


@njit(cache=True, inline="always")
def _tanh_s(z):
    # tanh via expm1 keeps full precision near zero and never overflows
    if z > 20.0:
        return 1.0
    if z < -20.0:
        return -1.0
    em = math.expm1(2.0 * z)
    return em / (em + 2.0)


@njit(cache=True, inline="always")
def _sigmoid_s(z):
    if z >= 0.0:
        e = math.exp(-z)
        return 1.0 / (1.0 + e)
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True, parallel=True)
def _gelu_nb(x, y, dy):
    for i in prange(x.size):
        v = x[i]
        v2 = v * v
        t = _tanh_s(_GELU_C * (v + _GELU_A * v * v2))
        y[i] = 0.5 * v * (1.0 + t)
        dy[i] = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * _GELU_C * (
            1.0 + 3.0 * _GELU_A * v2
        )


@njit(cache=True, parallel=True)
def _swish_nb(x, y, dy):
    for i in prange(x.size):
        v = x[i]
        s = _sigmoid_s(v)
        y[i] = v * s
        dy[i] = s * (1.0 + v * (1.0 - s))


def _sigmoid_np(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def gelu(x):
    """GELU (tanh form). Returns (value, derivative), both shaped like x."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if _enabled:
        y = np.empty_like(x)
        dy = np.empty_like(x)
        _gelu_nb(x.ravel(), y.ravel(), dy.ravel())
        return y, dy
    v2 = x * x
    t = np.tanh(_GELU_C * (x + _GELU_A * x * v2))
    y = 0.5 * x * (1.0 + t)
    dy = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3.0 * _GELU_A * v2)
    return y, dy


def swish(x):
    """swish(z) = z * sigmoid(z). Returns (value, derivative)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if _enabled:
        y = np.empty_like(x)
        dy = np.empty_like(x)
        _swish_nb(x.ravel(), y.ravel(), dy.ravel())
        return y, dy
    s = _sigmoid_np(x)
    return x * s, s * (1.0 + x * (1.0 - s))


# ---------------------------------------------------------------------------
# Adam update, fused over one flat parameter array


@njit(cache=True, parallel=True)
def _adam_nb(w, g, m, v, lr, b1, b2, eps, bc1, bc2):
    for i in prange(w.size):
        gi = g[i]
        mi = b1 * m[i] + (1.0 - b1) * gi
        vi = b2 * v[i] + (1.0 - b2) * gi * gi
        m[i] = mi
        v[i] = vi
        w[i] -= lr * (mi / bc1) / (math.sqrt(vi / bc2) + eps)


def adam_update(w, g, m, v, step, lr, b1=0.9, b2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place on w, m, v.

    ``step`` is the 1-based update count used for bias correction.
    """
    bc1 = 1.0 - b1**step
    bc2 = 1.0 - b2**step
    if _enabled:
        _adam_nb(w.ravel(), g.ravel(), m.ravel(), v.ravel(), lr, b1, b2, eps, bc1, bc2)
        return
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    w -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


# ---------------------------------------------------------------------------
# recurrent sequence kernels (time-major [T, B, ...]; zero initial state)


@njit(cache=True)
def _rnn_fwd_nb(x_seq, wx, wh, b):
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    h_all = np.zeros((T + 1, B, H))
    for t in range(T):
        z = np.dot(x_seq[t], wx) + np.dot(h_all[t], wh)
        h = h_all[t + 1]
        for i in range(B):
            for j in range(H):
                h[i, j] = _tanh_s(z[i, j] + b[j])
    return h_all


def _rnn_fwd_np(x_seq, wx, wh, b):
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    h_all = np.zeros((T + 1, B, H))
    for t in range(T):
        h_all[t + 1] = np.tanh(x_seq[t] @ wx + h_all[t] @ wh + b)
    return h_all


@njit(cache=True)
def _rnn_bwd_nb(x_seq, h_all, wx, wh, dh_out):
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(H)
    dx = np.empty_like(x_seq)
    carry = np.zeros((B, H))
    dz = np.empty((B, H))
    for t in range(T - 1, -1, -1):
        h = h_all[t + 1]
        for i in range(B):
            for j in range(H):
                hv = h[i, j]
                d = (dh_out[t, i, j] + carry[i, j]) * (1.0 - hv * hv)
                dz[i, j] = d
                db[j] += d
        dwx += np.dot(x_seq[t].T, dz)
        dwh += np.dot(h_all[t].T, dz)
        dx[t] = np.dot(dz, wx.T)
        carry = np.dot(dz, wh.T)
    return dwx, dwh, db, dx


def _rnn_bwd_np(x_seq, h_all, wx, wh, dh_out):
    T, B, _ = x_seq.shape
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(wh.shape[0])
    dx = np.empty_like(x_seq)
    carry = 0.0
    for t in range(T - 1, -1, -1):
        h = h_all[t + 1]
        dz = (dh_out[t] + carry) * (1.0 - h * h)
        db += dz.sum(axis=0)
        dwx += x_seq[t].T @ dz
        dwh += h_all[t].T @ dz
        dx[t] = dz @ wx.T
        carry = dz @ wh.T
    return dwx, dwh, db, dx


@njit(cache=True)
def _gru_fwd_nb(x_seq, wx, wh, b_in, b_rec):
    # gate order along the last axis: reset, update, candidate
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    h_all = np.zeros((T + 1, B, H))
    gates = np.empty((T, B, 3 * H))
    hnrec = np.empty((T, B, H))
    for t in range(T):
        gi = np.dot(x_seq[t], wx)
        gh = np.dot(h_all[t], wh)
        hp = h_all[t]
        h = h_all[t + 1]
        for i in range(B):
            for j in range(H):
                r = _sigmoid_s(gi[i, j] + b_in[j] + gh[i, j] + b_rec[j])
                z = _sigmoid_s(
                    gi[i, H + j] + b_in[H + j] + gh[i, H + j] + b_rec[H + j]
                )
                nr = gh[i, 2 * H + j] + b_rec[2 * H + j]
                n = _tanh_s(gi[i, 2 * H + j] + b_in[2 * H + j] + r * nr)
                gates[t, i, j] = r
                gates[t, i, H + j] = z
                gates[t, i, 2 * H + j] = n
                hnrec[t, i, j] = nr
                h[i, j] = (1.0 - z) * n + z * hp[i, j]
    return h_all, gates, hnrec


def _gru_fwd_np(x_seq, wx, wh, b_in, b_rec):
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    h_all = np.zeros((T + 1, B, H))
    gates = np.empty((T, B, 3 * H))
    hnrec = np.empty((T, B, H))
    for t in range(T):
        gi = x_seq[t] @ wx + b_in
        gh = h_all[t] @ wh + b_rec
        r = _sigmoid_np(gi[:, :H] + gh[:, :H])
        z = _sigmoid_np(gi[:, H : 2 * H] + gh[:, H : 2 * H])
        nr = gh[:, 2 * H :]
        n = np.tanh(gi[:, 2 * H :] + r * nr)
        gates[t, :, :H] = r
        gates[t, :, H : 2 * H] = z
        gates[t, :, 2 * H :] = n
        hnrec[t] = nr
        h_all[t + 1] = (1.0 - z) * n + z * h_all[t]
    return h_all, gates, hnrec


@njit(cache=True)
def _gru_bwd_nb(x_seq, h_all, gates, hnrec, wx, wh, dh_out):
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db_in = np.zeros(3 * H)
    db_rec = np.zeros(3 * H)
    dx = np.empty_like(x_seq)
    carry = np.zeros((B, H))
    dgi = np.empty((B, 3 * H))
    dgh = np.empty((B, 3 * H))
    for t in range(T - 1, -1, -1):
        hp = h_all[t]
        for i in range(B):
            for j in range(H):
                dh = dh_out[t, i, j] + carry[i, j]
                r = gates[t, i, j]
                z = gates[t, i, H + j]
                n = gates[t, i, 2 * H + j]
                dz = dh * (hp[i, j] - n) * z * (1.0 - z)
                dn_pre = dh * (1.0 - z) * (1.0 - n * n)
                dr_pre = dn_pre * hnrec[t, i, j] * r * (1.0 - r)
                dgi[i, j] = dr_pre
                dgi[i, H + j] = dz
                dgi[i, 2 * H + j] = dn_pre
                dgh[i, j] = dr_pre
                dgh[i, H + j] = dz
                dgh[i, 2 * H + j] = dn_pre * r
                carry[i, j] = dh * z
                db_in[j] += dr_pre
                db_in[H + j] += dz
                db_in[2 * H + j] += dn_pre
                db_rec[j] += dr_pre
                db_rec[H + j] += dz
                db_rec[2 * H + j] += dn_pre * r
        dwx += np.dot(x_seq[t].T, dgi)
        dwh += np.dot(hp.T, dgh)
        dx[t] = np.dot(dgi, wx.T)
        carry += np.dot(dgh, wh.T)
    return dwx, dwh, db_in, db_rec, dx


def _gru_bwd_np(x_seq, h_all, gates, hnrec, wx, wh, dh_out):
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db_in = np.zeros(3 * H)
    db_rec = np.zeros(3 * H)
    dx = np.empty_like(x_seq)
    carry = 0.0
    for t in range(T - 1, -1, -1):
        hp = h_all[t]
        r = gates[t, :, :H]
        z = gates[t, :, H : 2 * H]
        n = gates[t, :, 2 * H :]
        dh = dh_out[t] + carry
        dz = dh * (hp - n) * z * (1.0 - z)
        dn_pre = dh * (1.0 - z) * (1.0 - n * n)
        dr_pre = dn_pre * hnrec[t] * r * (1.0 - r)
        dgi = np.concatenate((dr_pre, dz, dn_pre), axis=1)
        dgh = np.concatenate((dr_pre, dz, dn_pre * r), axis=1)
        db_in += dgi.sum(axis=0)
        db_rec += dgh.sum(axis=0)
        dwx += x_seq[t].T @ dgi
        dwh += hp.T @ dgh
        dx[t] = dgi @ wx.T
        carry = dh * z + dgh @ wh.T
    return dwx, dwh, db_in, db_rec, dx


@njit(cache=True)
def _lstm_fwd_nb(x_seq, wx, wh, b):
    # gate order along the last axis: input, forget, cell, output
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    h_all = np.zeros((T + 1, B, H))
    c_all = np.zeros((T + 1, B, H))
    gates = np.empty((T, B, 4 * H))
    tanh_c = np.empty((T, B, H))
    for t in range(T):
        pre = np.dot(x_seq[t], wx) + np.dot(h_all[t], wh)
        cp = c_all[t]
        for i in range(B):
            for j in range(H):
                ig = _sigmoid_s(pre[i, j] + b[j])
                fg = _sigmoid_s(pre[i, H + j] + b[H + j])
                gg = _tanh_s(pre[i, 2 * H + j] + b[2 * H + j])
                og = _sigmoid_s(pre[i, 3 * H + j] + b[3 * H + j])
                c = fg * cp[i, j] + ig * gg
                tc = _tanh_s(c)
                gates[t, i, j] = ig
                gates[t, i, H + j] = fg
                gates[t, i, 2 * H + j] = gg
                gates[t, i, 3 * H + j] = og
                c_all[t + 1, i, j] = c
                tanh_c[t, i, j] = tc
                h_all[t + 1, i, j] = og * tc
    return h_all, c_all, gates, tanh_c


def _lstm_fwd_np(x_seq, wx, wh, b):
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    h_all = np.zeros((T + 1, B, H))
    c_all = np.zeros((T + 1, B, H))
    gates = np.empty((T, B, 4 * H))
    tanh_c = np.empty((T, B, H))
    for t in range(T):
        pre = x_seq[t] @ wx + h_all[t] @ wh + b
        ig = _sigmoid_np(pre[:, :H])
        fg = _sigmoid_np(pre[:, H : 2 * H])
        gg = np.tanh(pre[:, 2 * H : 3 * H])
        og = _sigmoid_np(pre[:, 3 * H :])
        c = fg * c_all[t] + ig * gg
        gates[t, :, :H] = ig
        gates[t, :, H : 2 * H] = fg
        gates[t, :, 2 * H : 3 * H] = gg
        gates[t, :, 3 * H :] = og
        c_all[t + 1] = c
        tanh_c[t] = np.tanh(c)
        h_all[t + 1] = og * tanh_c[t]
    return h_all, c_all, gates, tanh_c


@njit(cache=True)
def _lstm_bwd_nb(x_seq, h_all, c_all, gates, tanh_c, wx, wh, dh_out):
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H)
    dx = np.empty_like(x_seq)
    carry_h = np.zeros((B, H))
    carry_c = np.zeros((B, H))
    dpre = np.empty((B, 4 * H))
    for t in range(T - 1, -1, -1):
        cp = c_all[t]
        for i in range(B):
            for j in range(H):
                dh = dh_out[t, i, j] + carry_h[i, j]
                ig = gates[t, i, j]
                fg = gates[t, i, H + j]
                gg = gates[t, i, 2 * H + j]
                og = gates[t, i, 3 * H + j]
                tc = tanh_c[t, i, j]
                dc = dh * og * (1.0 - tc * tc) + carry_c[i, j]
                di = dc * gg * ig * (1.0 - ig)
                df = dc * cp[i, j] * fg * (1.0 - fg)
                dg = dc * ig * (1.0 - gg * gg)
                do = dh * tc * og * (1.0 - og)
                dpre[i, j] = di
                dpre[i, H + j] = df
                dpre[i, 2 * H + j] = dg
                dpre[i, 3 * H + j] = do
                db[j] += di
                db[H + j] += df
                db[2 * H + j] += dg
                db[3 * H + j] += do
                carry_c[i, j] = dc * fg
        dwx += np.dot(x_seq[t].T, dpre)
        dwh += np.dot(h_all[t].T, dpre)
        dx[t] = np.dot(dpre, wx.T)
        carry_h = np.dot(dpre, wh.T)
    return dwx, dwh, db, dx


def _lstm_bwd_np(x_seq, h_all, c_all, gates, tanh_c, wx, wh, dh_out):
    T, B, _ = x_seq.shape
    H = wh.shape[0]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H)
    dx = np.empty_like(x_seq)
    carry_h = 0.0
    carry_c = 0.0
    for t in range(T - 1, -1, -1):
        ig = gates[t, :, :H]
        fg = gates[t, :, H : 2 * H]
        gg = gates[t, :, 2 * H : 3 * H]
        og = gates[t, :, 3 * H :]
        tc = tanh_c[t]
        dh = dh_out[t] + carry_h
        dc = dh * og * (1.0 - tc * tc) + carry_c
        dpre = np.concatenate(
            (
                dc * gg * ig * (1.0 - ig),
                dc * c_all[t] * fg * (1.0 - fg),
                dc * ig * (1.0 - gg * gg),
                dh * tc * og * (1.0 - og),
            ),
            axis=1,
        )
        db += dpre.sum(axis=0)
        dwx += x_seq[t].T @ dpre
        dwh += h_all[t].T @ dpre
        dx[t] = dpre @ wx.T
        carry_h = dpre @ wh.T
        carry_c = dc * fg
    return dwx, dwh, db, dx


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def rnn_forward(x_seq, wx, wh, b):
    f = _rnn_fwd_nb if _enabled else _rnn_fwd_np
    return f(_c(x_seq), _c(wx), _c(wh), _c(b))


def rnn_backward(x_seq, h_all, wx, wh, dh_out):
    f = _rnn_bwd_nb if _enabled else _rnn_bwd_np
    return f(_c(x_seq), _c(h_all), _c(wx), _c(wh), _c(dh_out))


def gru_forward(x_seq, wx, wh, b_in, b_rec):
    f = _gru_fwd_nb if _enabled else _gru_fwd_np
    return f(_c(x_seq), _c(wx), _c(wh), _c(b_in), _c(b_rec))


def gru_backward(x_seq, h_all, gates, hnrec, wx, wh, dh_out):
    f = _gru_bwd_nb if _enabled else _gru_bwd_np
    return f(_c(x_seq), _c(h_all), _c(gates), _c(hnrec), _c(wx), _c(wh), _c(dh_out))


def lstm_forward(x_seq, wx, wh, b):
    f = _lstm_fwd_nb if _enabled else _lstm_fwd_np
    return f(_c(x_seq), _c(wx), _c(wh), _c(b))


def lstm_backward(x_seq, h_all, c_all, gates, tanh_c, wx, wh, dh_out):
    f = _lstm_bwd_nb if _enabled else _lstm_bwd_np
    return f(
        _c(x_seq), _c(h_all), _c(c_all), _c(gates), _c(tanh_c), _c(wx), _c(wh), _c(dh_out)
    )
