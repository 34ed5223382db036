"""geopriv: location-obfuscation mechanisms and their honest evaluation.

Planar Laplace, Gaussian, and uniform-circle noise with exact densities and
calibration; the decision-adversary reading of the per-meter
indistinguishability guarantee (error floor 1/(1+exp(eps*d))); posterior
remapping over popularity priors; and a seeded, bit-reproducible Monte Carlo
harness for the privacy/utility trade-off.
"""

__version__ = "0.1.0"

from geopriv._kernels import BACKEND
from geopriv.geo import (
    EARTH_RADIUS_M,
    GeoPoint,
    Grid,
    PlanarPoint,
    ProjectionRef,
    cell_center,
    distance,
    locate,
    project,
)
from geopriv.mechanisms import (
    Circular,
    Gaussian,
    Laplace,
    MechanismParams,
    RemappedMechanism,
    analytic_qavg,
    analytic_r95,
    calibrate_to_qavg,
    density,
    lambert_w_minus1,
    remap,
    remapped_sample,
    sample,
)
from geopriv.metrics import (
    DecisionScenario,
    DiscreteMechanism,
    Pmf,
    epsilon_star,
    multiplicative_distance,
    perr,
    perr_min,
    posterior,
    posterior_bound_holds,
    prior_diameter,
    tightest_epsilon,
)
from geopriv.rng import RandomStream

__all__ = [
    "BACKEND",
    "EARTH_RADIUS_M",
    "GeoPoint",
    "PlanarPoint",
    "ProjectionRef",
    "Grid",
    "project",
    "distance",
    "locate",
    "cell_center",
    "Laplace",
    "Gaussian",
    "Circular",
    "MechanismParams",
    "RemappedMechanism",
    "lambert_w_minus1",
    "sample",
    "density",
    "analytic_qavg",
    "calibrate_to_qavg",
    "analytic_r95",
    "remap",
    "remapped_sample",
    "Pmf",
    "DiscreteMechanism",
    "DecisionScenario",
    "multiplicative_distance",
    "epsilon_star",
    "perr_min",
    "perr",
    "posterior",
    "prior_diameter",
    "tightest_epsilon",
    "posterior_bound_holds",
    "RandomStream",
    "__version__",
]
