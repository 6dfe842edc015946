# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel implementations (hot loops of training).

Same interface and gate layout as `_numpy`; see that module for the
reference semantics. Arrays must be C-contiguous float64.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt, tanh

cnp.import_array()


cdef inline double _sigmoid(double v) noexcept nogil:
    return 1.0 / (1.0 + exp(-v))


def adam_update(
    double[::1] p,
    double[::1] g,
    double[::1] m,
    double[::1] v,
    double beta1,
    double beta2,
    double step_scale,
    double inv_sqrt_bc2,
    double eps,
):
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i
    cdef double gi, gsum = 0.0
    with nogil:
        for i in range(n):
            gi = g[i]
            gsum += gi
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi
            p[i] -= step_scale * m[i] / (sqrt(v[i]) * inv_sqrt_bc2 + eps)
    return gsum


def conv1d_same_forward(double[:, ::1] x, double[:, :, ::1] w, double[::1] b):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t ci = x.shape[1]
    cdef Py_ssize_t k = w.shape[0]
    cdef Py_ssize_t co = w.shape[2]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, co), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t t, j, c, o, src
    cdef double acc

    with nogil:
        for t in range(n):
            for o in range(co):
                y[t, o] = b[o]
            for j in range(k):
                src = t + j - pad
                if src < 0 or src >= n:
                    continue
                for c in range(ci):
                    acc = x[src, c]
                    if acc == 0.0:
                        continue
                    for o in range(co):
                        y[t, o] += acc * w[j, c, o]
    return out


def conv1d_same_backward(double[:, ::1] x, double[:, :, ::1] w, double[:, ::1] dy):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t ci = x.shape[1]
    cdef Py_ssize_t k = w.shape[0]
    cdef Py_ssize_t co = w.shape[2]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef cnp.ndarray[double, ndim=2] dx_arr = np.zeros((n, ci), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3] dw_arr = np.zeros((k, ci, co), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] db_arr = np.zeros(co, dtype=np.float64)
    cdef double[:, ::1] dx = dx_arr
    cdef double[:, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t t, j, c, o, src
    cdef double g, xv

    with nogil:
        for t in range(n):
            for o in range(co):
                db[o] += dy[t, o]
            for j in range(k):
                src = t + j - pad
                if src < 0 or src >= n:
                    continue
                for c in range(ci):
                    xv = x[src, c]
                    g = 0.0
                    for o in range(co):
                        g += dy[t, o] * w[j, c, o]
                        dw[j, c, o] += xv * dy[t, o]
                    dx[src, c] += g
    return dx_arr, dw_arr, db_arr


def gru_scan_forward(double[:, ::1] xw, double[::1] h0, double[:, ::1] wh, double[::1] b):
    cdef Py_ssize_t n = xw.shape[0]
    cdef Py_ssize_t d = h0.shape[0]
    cdef cnp.ndarray[double, ndim=2] h_arr = np.empty((n, d), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] z_arr = np.empty((n, d), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] r_arr = np.empty((n, d), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] hc_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] r = r_arr
    cdef double[:, ::1] hc = hc_arr
    cdef Py_ssize_t t, i, j
    cdef double az, ar, ac, hp

    with nogil:
        for t in range(n):
            for i in range(d):
                az = xw[t, i] + b[i]
                ar = xw[t, d + i] + b[d + i]
                for j in range(d):
                    hp = h0[j] if t == 0 else h[t - 1, j]
                    az += hp * wh[j, i]
                    ar += hp * wh[j, d + i]
                z[t, i] = _sigmoid(az)
                r[t, i] = _sigmoid(ar)
            for i in range(d):
                ac = xw[t, 2 * d + i] + b[2 * d + i]
                for j in range(d):
                    hp = h0[j] if t == 0 else h[t - 1, j]
                    ac += r[t, j] * hp * wh[j, 2 * d + i]
                hc[t, i] = tanh(ac)
            for i in range(d):
                hp = h0[i] if t == 0 else h[t - 1, i]
                h[t, i] = (1.0 - z[t, i]) * hp + z[t, i] * hc[t, i]
    return h_arr, z_arr, r_arr, hc_arr


def gru_scan_backward(
    double[:, ::1] dh,
    double[:, ::1] h,
    double[::1] h0,
    double[:, ::1] z,
    double[:, ::1] r,
    double[:, ::1] hc,
    double[:, ::1] wh,
):
    cdef Py_ssize_t n = dh.shape[0]
    cdef Py_ssize_t d = dh.shape[1]
    cdef cnp.ndarray[double, ndim=2] dxw_arr = np.empty((n, 3 * d), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] dh0_arr = np.zeros(d, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] dwh_arr = np.zeros((d, 3 * d), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] db_arr = np.zeros(3 * d, dtype=np.float64)
    cdef double[:, ::1] dxw = dxw_arr
    cdef double[::1] carry = dh0_arr
    cdef double[:, ::1] dwh = dwh_arr
    cdef double[::1] db = db_arr
    cdef cnp.ndarray[double, ndim=1] tmp_arr = np.zeros(3 * d, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] prev_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] gates = tmp_arr  # per-step (daz, dar, dac)
    cdef double[::1] dh_prev = prev_arr
    cdef Py_ssize_t t, i, j
    cdef double g, ds, hp, daz, dar, dac

    with nogil:
        for t in range(n - 1, -1, -1):
            for i in range(d):
                hp = h0[i] if t == 0 else h[t - 1, i]
                g = dh[t, i] + carry[i]
                dac = g * z[t, i] * (1.0 - hc[t, i] * hc[t, i])
                daz = g * (hc[t, i] - hp) * z[t, i] * (1.0 - z[t, i])
                gates[i] = daz
                gates[2 * d + i] = dac
                dh_prev[i] = g * (1.0 - z[t, i])
            # route candidate gradient through s = r * h_prev
            for j in range(d):
                hp = h0[j] if t == 0 else h[t - 1, j]
                ds = 0.0
                for i in range(d):
                    ds += gates[2 * d + i] * wh[j, 2 * d + i]
                gates[d + j] = ds * hp * r[t, j] * (1.0 - r[t, j])  # dar
                dh_prev[j] += ds * r[t, j]
            for j in range(d):
                hp = h0[j] if t == 0 else h[t - 1, j]
                ds = 0.0
                for i in range(d):
                    ds += gates[i] * wh[j, i] + gates[d + i] * wh[j, d + i]
                    dwh[j, i] += hp * gates[i]
                    dwh[j, d + i] += hp * gates[d + i]
                    dwh[j, 2 * d + i] += r[t, j] * hp * gates[2 * d + i]
                dh_prev[j] += ds
            for i in range(3 * d):
                dxw[t, i] = gates[i]
                db[i] += gates[i]
            for i in range(d):
                carry[i] = dh_prev[i]
    return dxw_arr, dh0_arr, dwh_arr, db_arr
