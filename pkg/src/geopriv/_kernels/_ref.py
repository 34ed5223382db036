"""Pure NumPy implementations of the numerical kernels.

Mirrors the compiled module ``geopriv._kernels._fast`` function for function;
used when the extension is unavailable or GEOPRIV_BACKEND=python forces it.
Inputs are assumed validated by the callers in geopriv.mechanisms.
"""

from __future__ import annotations

import numpy as np

INV_E = float(np.exp(-1.0))

# below this, exp(log_density) underflows even denormal doubles
LOG_UNDERFLOW = -744.0

_BRANCH_SERIES_Q = 1e-8  # use the branch-point series alone when 1 + e*y < this

# posterior cells this far (in log weight) below the peak are dropped: their
# relative weight < 3e-20, orders of magnitude under every remap tolerance
_PRUNE_LOG = -45.0


def _wm1_initial(y: np.ndarray) -> np.ndarray:
    """Starting guesses for the W_{-1} Newton iteration."""
    w = np.empty_like(y)
    q = 2.0 * (1.0 + np.e * y)
    near = q < 0.64  # branch-point series region, |p| < 0.8
    if np.any(near):
        p = -np.sqrt(np.maximum(q[near], 0.0))
        w[near] = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)))
    far = ~near
    if np.any(far):
        # asymptotic w ~ log(-y) - log(-log(-y)) with first correction
        l1 = np.log(-y[far])
        l2 = np.log(-l1)
        w[far] = l1 - l2 + l2 / l1
    return w


def lambert_wm1_array(y) -> np.ndarray:
    """W_{-1}(y) for y in [-1/e, 0): the w <= -1 solution of w*exp(w) = y.

    Newton iteration on the log form h(w) = w + log(-w) - log(-y), which is
    increasing and concave on w < -1, so iterates approach the root from the
    left and can never cross onto the upper branch. One final Newton step on
    w*exp(w) - y itself polishes the residual to a few ulps of |y|.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = _wm1_initial(y)
    # this close to the branch point the series is already at full precision
    # and the Newton denominators degenerate
    near_branch = 2.0 * (1.0 + np.e * y) < _BRANCH_SERIES_Q
    active = ~near_branch
    log_my = np.log(-y[active])
    wa = w[active]
    for _ in range(50):
        h = wa + np.log(-wa) - log_my
        step = h * wa / (wa + 1.0)
        wa = wa - step
        if np.all(np.abs(step) <= 4e-16 * np.abs(wa)):
            break
    # polish: one Newton step on f(w) = w*exp(w) - y
    ew = np.exp(wa)
    f = wa * ew - y[active]
    wa = wa - f / (ew * (wa + 1.0))
    w[active] = wa
    return w


def lambert_wm1(y: float) -> float:
    return float(lambert_wm1_array(np.array([y]))[0])


def laplace_radii(eps: float, p) -> np.ndarray:
    """Inverse radial CDF of planar Laplace noise: solve 1-(1+eps*r)exp(-eps*r)=p."""
    p = np.ascontiguousarray(p, dtype=np.float64)
    y = (p - 1.0) * INV_E
    return -(lambert_wm1_array(y) + 1.0) / eps


def weiszfeld(px, py, wts, x0: float, y0: float, tol: float, max_iters: int):
    """Weighted geometric median by Weiszfeld iteration with the
    Vardi-Zhang fix at support points.

    Returns (x, y, iterations). Stops when the iterate moves less than
    ``tol`` meters or lands on a support point that passes the optimality
    test (residual force <= the point's weight).
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    wts = np.asarray(wts, dtype=np.float64)
    x, y = float(x0), float(y0)
    for it in range(1, max_iters + 1):
        d = np.hypot(px - x, py - y)
        j = int(np.argmin(d))
        if d[j] <= tol:
            # evaluate exactly at the support point
            ax, ay = float(px[j]), float(py[j])
            dj = np.hypot(px - ax, py - ay)
            at = dj == 0.0
            wj = float(wts[at].sum())
            inv = np.where(at, 0.0, wts / np.where(at, 1.0, dj))
            rx = float(((px - ax) * inv).sum())
            ry = float(((py - ay) * inv).sum())
            r = np.hypot(rx, ry)
            if r <= wj:
                return ax, ay, it
            s = inv.sum()
            tx = float((px * inv).sum()) / s
            ty = float((py * inv).sum()) / s
            lam = min(1.0, wj / r)
            nx = (1.0 - lam) * tx + lam * ax
            ny = (1.0 - lam) * ty + lam * ay
        else:
            inv = wts / d
            s = inv.sum()
            nx = float((px * inv).sum()) / s
            ny = float((py * inv).sum()) / s
        if np.hypot(nx - x, ny - y) < tol:
            return nx, ny, it
        x, y = nx, ny
    return x, y, max_iters


def remap_batch(cx, cy, log_prior, eps: float, zx, zy, tol: float, max_iters: int):
    """Posterior geometric median for every intermediate location.

    For each z' computes posterior weights w_i proportional to
    prior_i * exp(-eps * |c_i - z'|) over the support cells, then runs
    Weiszfeld from the posterior-weighted mean. Entries whose largest
    log-density underflows a double come back as NaN (degenerate posterior);
    the caller substitutes z'.
    """
    cx = np.asarray(cx, dtype=np.float64)
    cy = np.asarray(cy, dtype=np.float64)
    log_prior = np.asarray(log_prior, dtype=np.float64)
    zx = np.asarray(zx, dtype=np.float64)
    zy = np.asarray(zy, dtype=np.float64)
    n = zx.shape[0]
    outx = np.empty(n)
    outy = np.empty(n)
    log_norm = 2.0 * np.log(eps) - np.log(2.0 * np.pi)
    for k in range(n):
        d = np.hypot(cx - zx[k], cy - zy[k])
        if log_norm - eps * float(d.min()) < LOG_UNDERFLOW:
            outx[k] = np.nan
            outy[k] = np.nan
            continue
        logw = log_prior - eps * d
        logw -= float(logw.max())
        keep = logw >= _PRUNE_LOG
        w = np.exp(logw[keep])
        kx = cx[keep]
        ky = cy[keep]
        s = w.sum()
        x0 = float((kx * w).sum()) / s
        y0 = float((ky * w).sum()) / s
        outx[k], outy[k], _ = weiszfeld(kx, ky, w, x0, y0, tol, max_iters)
    return outx, outy
