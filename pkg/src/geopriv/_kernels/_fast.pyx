# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Function-for-function twin of geopriv._kernels._ref; see that module for the
algorithm notes. Inputs are assumed validated by geopriv.mechanisms.
"""

from libc.math cimport exp, log, sqrt, NAN, fabs

import numpy as np

cimport numpy as cnp

cnp.import_array()

INV_E = 0.36787944117144233

cdef double _INV_E = 0.36787944117144233
cdef double _E = 2.718281828459045
cdef double _LOG_UNDERFLOW = -744.0
cdef double _BRANCH_SERIES_Q = 1e-8
cdef double _TWO_PI = 6.283185307179586
# posterior cells this far (in log weight) below the peak are dropped
cdef double _PRUNE_LOG = -45.0

LOG_UNDERFLOW = _LOG_UNDERFLOW


cdef double _wm1_scalar(double y) nogil:
    cdef double q, p, w, l1, l2, h, step, ew, f
    cdef int i
    q = 2.0 * (1.0 + _E * y)
    if q < 0.64:
        if q < 0.0:
            q = 0.0
        p = -sqrt(q)
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)))
        if q < _BRANCH_SERIES_Q:
            return w
    else:
        l1 = log(-y)
        l2 = log(-l1)
        w = l1 - l2 + l2 / l1
    l1 = log(-y)
    for i in range(50):
        h = w + log(-w) - l1
        step = h * w / (w + 1.0)
        w = w - step
        if fabs(step) <= 4e-16 * fabs(w):
            break
    ew = exp(w)
    f = w * ew - y
    w = w - f / (ew * (w + 1.0))
    return w


def lambert_wm1(double y):
    return _wm1_scalar(y)


def lambert_wm1_array(y):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ya = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(ya.shape[0])
    cdef Py_ssize_t i, n = ya.shape[0]
    cdef double[::1] yv = ya
    cdef double[::1] ov = out
    with nogil:
        for i in range(n):
            ov[i] = _wm1_scalar(yv[i])
    return out


def laplace_radii(double eps, p):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pa = np.ascontiguousarray(p, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(pa.shape[0])
    cdef Py_ssize_t i, n = pa.shape[0]
    cdef double[::1] pv = pa
    cdef double[::1] ov = out
    with nogil:
        for i in range(n):
            ov[i] = -(_wm1_scalar((pv[i] - 1.0) * _INV_E) + 1.0) / eps
    return out


cdef int _weiszfeld_core(double[::1] px, double[::1] py, double[::1] wts,
                         double[::1] dbuf, Py_ssize_t n,
                         double x0, double y0, double tol, int max_iters,
                         double* rx_out, double* ry_out) nogil:
    """Shared Weiszfeld loop (one distance pass per iteration); returns the
    iteration count. ``dbuf`` is scratch of length >= n."""
    cdef Py_ssize_t i, j
    cdef int it
    cdef double x = x0, y = y0
    cdef double dx, dy, d, dmin, inv, s, sx, sy, nx, ny
    cdef double ax, ay, wj, rx, ry, r, lam, tx, ty
    for it in range(1, max_iters + 1):
        dmin = -1.0
        j = 0
        for i in range(n):
            dx = px[i] - x
            dy = py[i] - y
            d = sqrt(dx * dx + dy * dy)
            dbuf[i] = d
            if dmin < 0.0 or d < dmin:
                dmin = d
                j = i
        if dmin <= tol:
            # evaluate exactly at the support point
            ax = px[j]
            ay = py[j]
            wj = 0.0
            rx = 0.0
            ry = 0.0
            s = 0.0
            sx = 0.0
            sy = 0.0
            for i in range(n):
                dx = px[i] - ax
                dy = py[i] - ay
                d = sqrt(dx * dx + dy * dy)
                if d == 0.0:
                    wj += wts[i]
                else:
                    inv = wts[i] / d
                    rx += dx * inv
                    ry += dy * inv
                    s += inv
                    sx += px[i] * inv
                    sy += py[i] * inv
            r = sqrt(rx * rx + ry * ry)
            if r <= wj:
                rx_out[0] = ax
                ry_out[0] = ay
                return it
            tx = sx / s
            ty = sy / s
            lam = wj / r
            if lam > 1.0:
                lam = 1.0
            nx = (1.0 - lam) * tx + lam * ax
            ny = (1.0 - lam) * ty + lam * ay
        else:
            s = 0.0
            sx = 0.0
            sy = 0.0
            for i in range(n):
                inv = wts[i] / dbuf[i]
                s += inv
                sx += px[i] * inv
                sy += py[i] * inv
            nx = sx / s
            ny = sy / s
        dx = nx - x
        dy = ny - y
        if sqrt(dx * dx + dy * dy) < tol:
            rx_out[0] = nx
            ry_out[0] = ny
            return it
        x = nx
        y = ny
    rx_out[0] = x
    ry_out[0] = y
    return max_iters


def weiszfeld(px, py, wts, double x0, double y0, double tol, int max_iters):
    cdef double[::1] pxv = np.ascontiguousarray(px, dtype=np.float64)
    cdef double[::1] pyv = np.ascontiguousarray(py, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(wts, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dbuf = np.empty(pxv.shape[0])
    cdef double[::1] dv = dbuf
    cdef double ox = 0.0, oy = 0.0
    cdef int it
    with nogil:
        it = _weiszfeld_core(pxv, pyv, wv, dv, pxv.shape[0], x0, y0, tol, max_iters, &ox, &oy)
    return ox, oy, it


def remap_batch(cx, cy, log_prior, double eps, zx, zy, double tol, int max_iters):
    cdef double[::1] cxv = np.ascontiguousarray(cx, dtype=np.float64)
    cdef double[::1] cyv = np.ascontiguousarray(cy, dtype=np.float64)
    cdef double[::1] lpv = np.ascontiguousarray(log_prior, dtype=np.float64)
    cdef double[::1] zxv = np.ascontiguousarray(zx, dtype=np.float64)
    cdef double[::1] zyv = np.ascontiguousarray(zy, dtype=np.float64)
    cdef Py_ssize_t n = zxv.shape[0]
    cdef Py_ssize_t m = cxv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] outx = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] outy = np.empty(n)
    # compacted posterior support (cells within _PRUNE_LOG of the peak)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sxb = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] syb = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] swb = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lwb = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dbuf = np.empty(m)
    cdef double[::1] oxv = outx
    cdef double[::1] oyv = outy
    cdef double[::1] sx = sxb
    cdef double[::1] sy = syb
    cdef double[::1] sw = swb
    cdef double[::1] lw = lwb
    cdef double[::1] dv = dbuf
    cdef Py_ssize_t i, k, cnt
    cdef double log_norm, dmin, dx, dy, d, lmax, v, wsum, mx, my, ox, oy
    log_norm = 2.0 * log(eps) - log(_TWO_PI)
    with nogil:
        for k in range(n):
            dmin = -1.0
            lmax = -1e308
            for i in range(m):
                dx = cxv[i] - zxv[k]
                dy = cyv[i] - zyv[k]
                d = sqrt(dx * dx + dy * dy)
                if dmin < 0.0 or d < dmin:
                    dmin = d
                v = lpv[i] - eps * d
                lw[i] = v
                if v > lmax:
                    lmax = v
            if log_norm - eps * dmin < _LOG_UNDERFLOW:
                oxv[k] = NAN
                oyv[k] = NAN
                continue
            cnt = 0
            wsum = 0.0
            mx = 0.0
            my = 0.0
            for i in range(m):
                v = lw[i] - lmax
                if v >= _PRUNE_LOG:
                    v = exp(v)
                    sx[cnt] = cxv[i]
                    sy[cnt] = cyv[i]
                    sw[cnt] = v
                    wsum += v
                    mx += cxv[i] * v
                    my += cyv[i] * v
                    cnt += 1
            _weiszfeld_core(sx, sy, sw, dv, cnt, mx / wsum, my / wsum, tol, max_iters, &ox, &oy)
            oxv[k] = ox
            oyv[k] = oy
    return outx, outy
