"""Pure-numpy kernel implementations (fallback backend).

Mirrors the interface of the compiled `_native` extension. The GRU scan
takes the input-to-gate products precomputed (``xw = x @ wx``) so both
backends only own the sequential recurrence; gate layout along the last
axis is [update | reset | candidate].
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def adam_update(
    p: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    beta1: float,
    beta2: float,
    step_scale: float,
    inv_sqrt_bc2: float,
    eps: float,
) -> float:
    """In-place bias-corrected Adam update on flat views; returns sum(g)
    so the caller can detect non-finite gradients from one scalar."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    denom = np.sqrt(v)
    denom *= inv_sqrt_bc2
    denom += eps
    update = m / denom
    update *= step_scale
    p -= update
    return float(g.sum())


def conv1d_same_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padded 1-D convolution. x: (N, Ci), w: (K, Ci, Co), b: (Co,)."""
    n = x.shape[0]
    k = w.shape[0]
    pad = (k - 1) // 2
    xpad = np.zeros((n + k - 1, x.shape[1]), dtype=np.float64)
    xpad[pad : pad + n] = x
    y = np.tile(b, (n, 1))
    for j in range(k):
        y += xpad[j : j + n] @ w[j]
    return y


def conv1d_same_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    n = x.shape[0]
    k = w.shape[0]
    pad = (k - 1) // 2
    xpad = np.zeros((n + k - 1, x.shape[1]), dtype=np.float64)
    xpad[pad : pad + n] = x
    dxpad = np.zeros_like(xpad)
    dw = np.empty_like(w)
    for j in range(k):
        dw[j] = xpad[j : j + n].T @ dy
        dxpad[j : j + n] += dy @ w[j].T
    db = dy.sum(axis=0)
    return dxpad[pad : pad + n].copy(), dw, db


def gru_scan_forward(xw: np.ndarray, h0: np.ndarray, wh: np.ndarray, b: np.ndarray):
    """Run the GRU recurrence over a sequence.

    xw: (N, 3D) precomputed input products, h0: (D,), wh: (D, 3D), b: (3D,).
    Returns (h, z, r, hc), each (N, D); h[t] = (1 - z)*h_prev + z*hc.
    """
    n = xw.shape[0]
    d = h0.shape[0]
    h = np.empty((n, d), dtype=np.float64)
    z = np.empty((n, d), dtype=np.float64)
    r = np.empty((n, d), dtype=np.float64)
    hc = np.empty((n, d), dtype=np.float64)
    wh_z, wh_r, wh_c = wh[:, :d], wh[:, d : 2 * d], wh[:, 2 * d :]
    b_z, b_r, b_c = b[:d], b[d : 2 * d], b[2 * d :]

    h_prev = h0
    for t in range(n):
        z[t] = _sigmoid(xw[t, :d] + b_z + h_prev @ wh_z)
        r[t] = _sigmoid(xw[t, d : 2 * d] + b_r + h_prev @ wh_r)
        hc[t] = np.tanh(xw[t, 2 * d :] + b_c + (r[t] * h_prev) @ wh_c)
        h[t] = (1.0 - z[t]) * h_prev + z[t] * hc[t]
        h_prev = h[t]
    return h, z, r, hc


def gru_scan_backward(
    dh: np.ndarray,
    h: np.ndarray,
    h0: np.ndarray,
    z: np.ndarray,
    r: np.ndarray,
    hc: np.ndarray,
    wh: np.ndarray,
):
    """Backpropagate through the GRU recurrence.

    dh: (N, D) gradients wrt every step's output. Returns
    (dxw, dh0, dwh, db) matching gru_scan_forward's inputs.
    """
    n, d = dh.shape
    wh_z, wh_r, wh_c = wh[:, :d], wh[:, d : 2 * d], wh[:, 2 * d :]
    dxw = np.empty((n, 3 * d), dtype=np.float64)
    dwh = np.zeros_like(wh)
    db = np.zeros(3 * d, dtype=np.float64)

    carry = np.zeros(d, dtype=np.float64)
    for t in range(n - 1, -1, -1):
        h_prev = h[t - 1] if t > 0 else h0
        g = dh[t] + carry
        dhc = g * z[t]
        dz = g * (hc[t] - h_prev)
        dh_prev = g * (1.0 - z[t])

        dac = dhc * (1.0 - hc[t] * hc[t])
        s = r[t] * h_prev
        ds = dac @ wh_c.T
        dr = ds * h_prev
        dh_prev += ds * r[t]
        dwh[:, 2 * d :] += np.outer(s, dac)

        daz = dz * z[t] * (1.0 - z[t])
        dar = dr * r[t] * (1.0 - r[t])
        dwh[:, :d] += np.outer(h_prev, daz)
        dwh[:, d : 2 * d] += np.outer(h_prev, dar)
        dh_prev += daz @ wh_z.T + dar @ wh_r.T

        dxw[t, :d] = daz
        dxw[t, d : 2 * d] = dar
        dxw[t, 2 * d :] = dac
        db[:d] += daz
        db[d : 2 * d] += dar
        db[2 * d :] += dac
        carry = dh_prev
    return dxw, carry, dwh, db
