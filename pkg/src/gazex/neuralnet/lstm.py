"""Single-layer LSTM with explicit backpropagation through time.

Gate layout along the last weight axis is ``[input, forget, output, cell]``,
each ``H`` wide.  Sigmoids are evaluated as ``(1 + tanh(z / 2)) / 2`` so a
single ``tanh`` call covers all four gates and never overflows.
"""
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass
class LSTMCache:
    x: np.ndarray  # (T, B, D) time-major input
    hs: np.ndarray  # (T + 1, B, H), hs[0] = 0
    cs: np.ndarray  # (T + 1, B, H)
    acts: np.ndarray  # (T, B, 4H) activated gates
    tcs: np.ndarray  # (T, B, H) tanh(c_t)


def init_lstm(rng, n_in, n_hidden, dtype=np.float64):
    k = 1.0 / np.sqrt(n_hidden)
    return {
        "Wx": rng.uniform(-k, k, (n_in, 4 * n_hidden)).astype(dtype),
        "Wh": rng.uniform(-k, k, (n_hidden, 4 * n_hidden)).astype(dtype),
        "b": rng.uniform(-k, k, 4 * n_hidden).astype(dtype),
    }


def _check(x, Wx, Wh, b):
    H = Wh.shape[0]
    if Wh.shape != (H, 4 * H) or Wx.shape[1] != 4 * H or b.shape != (4 * H,):
        raise ShapeError(f"inconsistent LSTM weights: Wx {Wx.shape}, Wh {Wh.shape}, b {b.shape}")
    if x.shape[-1] != Wx.shape[0]:
        raise ShapeError(f"input width {x.shape[-1]} does not match weights ({Wx.shape[0]})")


def lstm_forward(x, Wx, Wh, b):
    """Run the recurrence from a zero state.

    ``x`` is ``(B, T, D)`` (or ``(T, D)`` for a single sequence).  Returns
    all hidden states with the same leading layout, ``(B, T, H)``, and a
    cache for :func:`lstm_backward`.
    """
    single = x.ndim == 2
    if single:
        x = x[None]
    _check(x, Wx, Wh, b)
    B, T, D = x.shape
    H = Wh.shape[0]
    dtype = Wx.dtype
    xt = np.ascontiguousarray(x.transpose(1, 0, 2), dtype=dtype)
    acts = (xt.reshape(T * B, D) @ Wx).reshape(T, B, 4 * H)
    acts += b
    hs = np.zeros((T + 1, B, H), dtype=dtype)
    cs = np.zeros((T + 1, B, H), dtype=dtype)
    tcs = np.empty((T, B, H), dtype=dtype)
    tmp = np.empty((B, H), dtype=dtype)
    H3 = 3 * H
    for t in range(T):
        z = acts[t]
        z += hs[t] @ Wh
        z[:, :H3] *= 0.5
        np.tanh(z, out=z)
        z[:, :H3] *= 0.5
        z[:, :H3] += 0.5
        c = cs[t + 1]
        np.multiply(z[:, H:2 * H], cs[t], out=c)
        np.multiply(z[:, :H], z[:, H3:], out=tmp)
        c += tmp
        np.tanh(c, out=tcs[t])
        np.multiply(z[:, 2 * H:H3], tcs[t], out=hs[t + 1])
    out = hs[1:].transpose(1, 0, 2)
    cache = LSTMCache(xt, hs, cs, acts, tcs)
    return (out[0] if single else out), cache


def lstm_backward(cache, Wx, Wh, d_last=None, d_all=None, need_dx=False):
    """Gradients of a scalar loss through the recurrence.

    ``d_last`` is the loss gradient on the final hidden state ``(B, H)``;
    ``d_all`` optionally adds gradients on every hidden state ``(B, T, H)``.
    Returns ``(dWx, dWh, db, dx)`` with ``dx`` shaped like the input
    ``(B, T, D)`` or None.
    """
    T, B, G = cache.acts.shape
    H = G // 4
    H3 = 3 * H
    dtype = cache.acts.dtype
    dz = np.empty((T, B, G), dtype=dtype)
    dh = np.zeros((B, H), dtype=dtype) if d_last is None else np.array(d_last, dtype=dtype)
    dc = np.zeros((B, H), dtype=dtype)
    d_all_t = None if d_all is None else np.asarray(d_all, dtype=dtype).transpose(1, 0, 2)
    WhT = np.ascontiguousarray(Wh.T)
    tmp = np.empty((B, H), dtype=dtype)
    for t in range(T - 1, -1, -1):
        if d_all_t is not None:
            dh = dh + d_all_t[t]
        a = cache.acts[t]
        i, f, o, g = a[:, :H], a[:, H:2 * H], a[:, 2 * H:H3], a[:, H3:]
        tc = cache.tcs[t]
        d = dz[t]
        # output gate
        np.multiply(dh, tc, out=tmp)
        np.multiply(tmp, o, out=d[:, 2 * H:H3])
        d[:, 2 * H:H3] *= 1.0 - o
        # cell state
        np.multiply(tc, tc, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        tmp *= o
        tmp *= dh
        dc += tmp
        np.multiply(dc, g, out=tmp)
        tmp *= i
        np.multiply(tmp, 1.0 - i, out=d[:, :H])
        np.multiply(dc, cache.cs[t], out=tmp)
        tmp *= f
        np.multiply(tmp, 1.0 - f, out=d[:, H:2 * H])
        np.multiply(g, g, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        tmp *= i
        np.multiply(tmp, dc, out=d[:, H3:])
        dc *= f
        dh = d @ WhT
    flat_dz = dz.reshape(T * B, G)
    dWh = cache.hs[:-1].reshape(T * B, H).T @ flat_dz
    dWx = cache.x.reshape(T * B, -1).T @ flat_dz
    db = flat_dz.sum(axis=0)
    dx = None
    if need_dx:
        dx = (flat_dz @ Wx.T).reshape(T, B, -1).transpose(1, 0, 2)
    return dWx, dWh, db, dx
