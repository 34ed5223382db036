"""Location-obfuscation mechanisms: planar Laplace, Gaussian, uniform circle.

All three add isotropic noise (uniform angle, family-specific radial law) to
the true location. The planar Laplace density (eps^2/2pi) exp(-eps*r) is the
one carrying the per-meter indistinguishability guarantee; its radial
quantile function inverts 1 - (1 + eps*r) exp(-eps*r) through the lower real
branch of the Lambert W function. The remapping overlay post-processes the
noisy location to the geometric median of the posterior over a popularity
prior, trading no privacy (it never sees the true location) for less loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from geopriv import _kernels
from geopriv.errors import DegeneratePrior, DomainError, InvalidUtility
from geopriv.geo import Grid, PlanarPoint, cell_center_arrays, distance
from geopriv.metrics import Pmf
from geopriv.rng import RandomStream

_TWO_PI = 2.0 * math.pi
_INV_E = _kernels.INV_E

# radial 95% quantile factors: solve (1+t)e^-t = 0.05 for Laplace,
# sqrt(-2 ln 0.05) for the Rayleigh radius, sqrt(0.95) for the disc
_LAPLACE_R95 = -(float(_kernels.lambert_wm1(-0.05 * _INV_E)) + 1.0)
_GAUSS_R95 = math.sqrt(-2.0 * math.log(0.05))
_CIRC_R95 = math.sqrt(0.95)

# sigma per meter of average loss; reused by both calibration directions so
# the round trip loses at most one ulp
_GAUSS_CAL = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class Laplace:
    """Planar Laplace noise; ``epsilon`` is the privacy budget in inverse meters."""

    epsilon: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError("epsilon must be positive and finite")


@dataclass(frozen=True)
class Gaussian:
    """Isotropic Gaussian noise; ``sigma`` is the per-axis deviation in meters."""

    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive and finite")


@dataclass(frozen=True)
class Circular:
    """Uniform noise in a disc of ``radius`` meters."""

    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError("radius must be positive and finite")


MechanismParams = Laplace | Gaussian | Circular

FAMILIES = {"laplace": Laplace, "gaussian": Gaussian, "circular": Circular}
_FAMILY_NAMES = {Laplace: "laplace", Gaussian: "gaussian", Circular: "circular"}


def family_name(params: MechanismParams) -> str:
    return _FAMILY_NAMES[type(params)]


def scale_of(params: MechanismParams) -> float:
    """The family's scale parameter (eps, sigma, or radius)."""
    if isinstance(params, Laplace):
        return params.epsilon
    if isinstance(params, Gaussian):
        return params.sigma
    return params.radius


def lambert_w_minus1(y: float) -> float:
    """Lower real branch of w * exp(w) = y, defined on [-1/e, 0).

    Returns w <= -1 with residual |w*exp(w) - y| within a few ulps of |y|.
    """
    if not (-_INV_E * (1.0 + 1e-12) <= y < 0.0):
        raise DomainError(f"lambert_w_minus1 domain is [-1/e, 0), got {y}")
    return float(_kernels.lambert_wm1(y))


def radial_ppf(params: MechanismParams, p):
    """Quantile function of the noise magnitude; ``p`` scalar or array in [0, 1)."""
    arr = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if isinstance(params, Laplace):
        out = _kernels.laplace_radii(params.epsilon, arr)
    elif isinstance(params, Gaussian):
        out = params.sigma * np.sqrt(-2.0 * np.log1p(-arr))
    else:
        out = params.radius * np.sqrt(arr)
    return float(out[0]) if np.isscalar(p) or np.asarray(p).ndim == 0 else out


def sample(params: MechanismParams, x: PlanarPoint, rnd: RandomStream) -> PlanarPoint:
    """One obfuscated location: x plus isotropic noise. Consumes two uniforms
    (angle, then radial quantile) from the stream."""
    u = rnd.uniforms(2)
    theta = _TWO_PI * u[0]
    r = radial_ppf(params, float(u[1]))
    return PlanarPoint(x.x + r * math.cos(theta), x.y + r * math.sin(theta))


def sample_arrays(params: MechanismParams, x: PlanarPoint, n: int, rnd: RandomStream):
    """n obfuscated locations as (xs, ys) arrays; same draw layout as ``sample``."""
    u = rnd.uniforms(2 * n).reshape(n, 2)
    theta = _TWO_PI * u[:, 0]
    r = radial_ppf(params, u[:, 1])
    return x.x + r * np.cos(theta), x.y + r * np.sin(theta)


def density(params: MechanismParams, z: PlanarPoint, x: PlanarPoint) -> float:
    """Mechanism density f(z|x) in probability per square meter."""
    return float(density_at_distance(params, distance(z, x)))


def density_at_distance(params: MechanismParams, r):
    """f(z|x) as a function of |z - x|; ``r`` scalar or array."""
    r = np.asarray(r, dtype=np.float64)
    if isinstance(params, Laplace):
        e = params.epsilon
        return (e * e / _TWO_PI) * np.exp(-e * r)
    if isinstance(params, Gaussian):
        s2 = params.sigma * params.sigma
        return np.exp(-(r * r) / (2.0 * s2)) / (_TWO_PI * s2)
    return np.where(r <= params.radius, 1.0 / (math.pi * params.radius**2), 0.0)


def analytic_qavg(params: MechanismParams) -> float:
    """Expected distance between true and obfuscated location: 2/eps for
    Laplace, sigma*sqrt(pi/2) for Gaussian, 2R/3 for the disc."""
    if isinstance(params, Laplace):
        return 2.0 / params.epsilon
    if isinstance(params, Gaussian):
        return params.sigma / _GAUSS_CAL
    return params.radius / 1.5


def calibrate_to_qavg(family, qavg: float) -> MechanismParams:
    """Parameters of ``family`` whose average loss is exactly ``qavg`` meters.

    ``family`` is a name from FAMILIES or one of the parameter classes.
    """
    try:
        qavg = float(qavg)
    except (TypeError, ValueError):
        raise InvalidUtility(f"average loss must be a number, got {qavg!r}")
    if not (math.isfinite(qavg) and qavg > 0):
        raise InvalidUtility(f"average loss must be positive and finite, got {qavg}")
    cls = FAMILIES.get(family, family) if isinstance(family, str) else family
    if cls is Laplace:
        return Laplace(2.0 / qavg)
    if cls is Gaussian:
        return Gaussian(qavg * _GAUSS_CAL)
    if cls is Circular:
        return Circular(1.5 * qavg)
    raise ValueError(f"unknown mechanism family {family!r}")


def analytic_r95(params: MechanismParams) -> float:
    """Radius around the true location containing the output with probability 0.95."""
    if isinstance(params, Laplace):
        return _LAPLACE_R95 / params.epsilon
    if isinstance(params, Gaussian):
        return params.sigma * _GAUSS_R95
    return params.radius * _CIRC_R95


@dataclass(frozen=True)
class RemappedMechanism:
    """Planar Laplace followed by a deterministic posterior-median remap.

    The remap sees only the intermediate location z' and the popularity
    ``prior`` over grid cells, never the true location, so it is pure
    post-processing and keeps the base mechanism's guarantee intact.
    """

    base: Laplace
    grid: Grid
    prior: Pmf  # over grid cell indices
    weiszfeld_tolerance: float = 1e-3
    weiszfeld_max_iters: int = 200

    def __post_init__(self):
        if not isinstance(self.base, Laplace):
            raise ValueError("remapping is defined over the planar Laplace base")
        if not (self.weiszfeld_tolerance > 0 and self.weiszfeld_max_iters >= 1):
            raise ValueError("bad Weiszfeld settings")
        if not all(isinstance(k, (int, np.integer)) for k in self.prior.support):
            raise ValueError("remap prior must be indexed by grid cells")
        if max(self.prior.support) >= self.grid.n_cells or min(self.prior.support) < 0:
            raise ValueError("prior cell index outside the grid")
        if not np.any(self.prior.masses > 0):
            raise ValueError("prior has no positive mass")

    @cached_property
    def _support_arrays(self):
        """Centers and log-masses of the positive-mass cells."""
        keep = self.prior.masses > 0
        cells = np.array([k for k, m in zip(self.prior.support, keep) if m], dtype=np.int64)
        cx, cy = cell_center_arrays(self.grid, cells)
        logm = np.log(self.prior.masses[keep])
        return np.ascontiguousarray(cx), np.ascontiguousarray(cy), np.ascontiguousarray(logm)


def remap(rm: RemappedMechanism, z_prime: PlanarPoint) -> PlanarPoint:
    """Deterministic remap of an intermediate location to the geometric median
    of the cell posterior p(c|z') ~ prior(c) * f(z'|center(c)).

    Raises DegeneratePrior when every cell's density underflows; callers fall
    back to z' itself.
    """
    cx, cy, logm = rm._support_arrays
    ox, oy = _kernels.remap_batch(
        cx,
        cy,
        logm,
        rm.base.epsilon,
        np.array([z_prime.x]),
        np.array([z_prime.y]),
        rm.weiszfeld_tolerance,
        rm.weiszfeld_max_iters,
    )
    if math.isnan(ox[0]):
        raise DegeneratePrior("all posterior mass underflowed for this location")
    return PlanarPoint(float(ox[0]), float(oy[0]))


def remap_arrays(rm: RemappedMechanism, zx, zy):
    """Batched ``remap``; degenerate entries fall back to z'.

    Returns (xs, ys, n_fallback).
    """
    cx, cy, logm = rm._support_arrays
    zx = np.ascontiguousarray(zx, dtype=np.float64)
    zy = np.ascontiguousarray(zy, dtype=np.float64)
    ox, oy = _kernels.remap_batch(
        cx, cy, logm, rm.base.epsilon, zx, zy, rm.weiszfeld_tolerance, rm.weiszfeld_max_iters
    )
    bad = np.isnan(ox)
    n_fallback = int(bad.sum())
    if n_fallback:
        ox[bad] = zx[bad]
        oy[bad] = zy[bad]
    return ox, oy, n_fallback


def remapped_sample(rm: RemappedMechanism, x: PlanarPoint, rnd: RandomStream) -> PlanarPoint:
    """Noise then remap; falls back to the intermediate location when the
    posterior is degenerate."""
    z_prime = sample(rm.base, x, rnd)
    try:
        return remap(rm, z_prime)
    except DegeneratePrior:
        return z_prime


def remapped_sample_arrays(rm: RemappedMechanism, x: PlanarPoint, n: int, rnd: RandomStream):
    """Batched ``remapped_sample``; returns (xs, ys)."""
    zx, zy = sample_arrays(rm.base, x, n, rnd)
    ox, oy, _ = remap_arrays(rm, zx, zy)
    return ox, oy


def params_to_json(params: MechanismParams, remap_spec: dict | None = None) -> dict:
    """Wire form: {family, scale_m_or_inv_km, remap?}. Laplace scale is eps in
    km^-1; Gaussian/Circular scales are meters."""
    scale = scale_of(params) * (1000.0 if isinstance(params, Laplace) else 1.0)
    out = {"family": family_name(params), "scale_m_or_inv_km": scale}
    if remap_spec is not None:
        out["remap"] = remap_spec
    return out


def params_from_json(obj: dict) -> MechanismParams:
    cls = FAMILIES.get(obj.get("family"))
    if cls is None:
        raise ValueError(f"unknown mechanism family {obj.get('family')!r}")
    scale = float(obj["scale_m_or_inv_km"])
    if cls is Laplace:
        return Laplace(scale / 1000.0)
    return cls(scale)
