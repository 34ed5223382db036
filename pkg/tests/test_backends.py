"""Cross-checks between the compiled kernels and the NumPy fallback."""

import math

import numpy as np
import pytest

from geopriv._kernels import _ref

_fast = pytest.importorskip("geopriv._kernels._fast")

INV_E = math.exp(-1.0)


def test_lambert_agreement():
    rng = np.random.default_rng(1)
    ys = -np.exp(rng.uniform(math.log(1e-18), math.log(INV_E * (1 - 1e-12)), 50_000))
    wr = _ref.lambert_wm1_array(ys)
    wf = _fast.lambert_wm1_array(ys)
    assert np.allclose(wr, wf, rtol=1e-14, atol=0)


def test_laplace_radii_agreement():
    rng = np.random.default_rng(2)
    p = rng.random(50_000)
    rr = _ref.laplace_radii(0.004, p)
    rf = _fast.laplace_radii(0.004, p)
    assert np.allclose(rr, rf, rtol=1e-13, atol=1e-12)


def test_weiszfeld_agreement():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        px = rng.uniform(0, 2000, n)
        py = rng.uniform(0, 2000, n)
        w = rng.dirichlet(np.ones(n))
        x0, y0 = float((px * w).sum()), float((py * w).sum())
        xr, yr, _ = _ref.weiszfeld(px, py, w, x0, y0, 1e-6, 500)
        xf, yf, _ = _fast.weiszfeld(px, py, w, x0, y0, 1e-6, 500)
        assert math.hypot(xr - xf, yr - yf) < 1e-6


def test_remap_batch_agreement():
    rng = np.random.default_rng(4)
    m = 300
    cx = rng.uniform(0, 5000, m)
    cy = rng.uniform(0, 5000, m)
    prior = rng.dirichlet(np.ones(m))
    logp = np.log(prior)
    zx = rng.uniform(0, 5000, 40)
    zy = rng.uniform(0, 5000, 40)
    oxr, oyr = _ref.remap_batch(cx, cy, logp, 0.004, zx, zy, 1e-4, 500)
    oxf, oyf = _fast.remap_batch(cx, cy, logp, 0.004, zx, zy, 1e-4, 500)
    assert np.allclose(oxr, oxf, atol=1e-3)
    assert np.allclose(oyr, oyf, atol=1e-3)


def test_remap_batch_degenerate_marks_match():
    cx = np.array([0.0, 100.0])
    cy = np.array([0.0, 0.0])
    logp = np.log(np.array([0.5, 0.5]))
    zx = np.array([3e5, 50.0])
    zy = np.array([0.0, 0.0])
    for mod in (_ref, _fast):
        ox, _ = mod.remap_batch(cx, cy, logp, 6.67e-3, zx, zy, 1e-3, 200)
        assert math.isnan(ox[0]) and not math.isnan(ox[1])
