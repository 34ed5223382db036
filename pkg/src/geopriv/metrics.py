"""Distinguishability metrics and the decision-adversary error.

The central quantities: the multiplicative (sup-log-ratio) distance between
distributions, the per-meter indistinguishability bound eps*d, the posterior
an adversary with prior side information computes from an observation, and
the error probability of the optimal two-location decision adversary with
its guaranteed floor 1/(1 + exp(eps*d)).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from geopriv.errors import BothZero, SupportMismatch, ZeroEvidence
from geopriv.geo import PlanarPoint, distance

# masses/densities below this are treated as exact zeros so that underflow
# cannot manufacture a spurious infinite log-ratio
ZERO_MASS = 1e-300


@dataclass(frozen=True, eq=False)
class Pmf:
    """Finite probability mass function over grid cells or planar points.

    ``support`` holds hashable keys (cell indices or PlanarPoints) and
    ``masses`` the matching probabilities: nonnegative, summing to 1 within
    1e-9, with distinct keys.
    """

    support: tuple
    masses: np.ndarray

    def __post_init__(self):
        masses = np.ascontiguousarray(self.masses, dtype=np.float64)
        masses.flags.writeable = False
        object.__setattr__(self, "masses", masses)
        if len(self.support) != masses.shape[0]:
            raise ValueError("support and masses must have equal length")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support entries must be distinct")
        if masses.size == 0:
            raise ValueError("empty pmf")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ValueError("masses must be finite and nonnegative")
        if abs(float(masses.sum()) - 1.0) > 1e-9:
            raise ValueError(f"masses sum to {float(masses.sum())}, not 1")

    def __repr__(self):
        return f"Pmf(n={len(self.support)})"

    @cached_property
    def _index(self) -> dict:
        return {k: i for i, k in enumerate(self.support)}

    def mass(self, key) -> float:
        i = self._index.get(key)
        return 0.0 if i is None else float(self.masses[i])

    def positive(self) -> "Pmf":
        """Restriction to positive-mass keys (same masses, zero entries dropped)."""
        keep = self.masses > 0
        if np.all(keep):
            return self
        return Pmf(tuple(k for k, m in zip(self.support, keep) if m), self.masses[keep])

    @classmethod
    def from_counts(cls, counts: dict) -> "Pmf":
        keys = tuple(counts)
        vals = np.array([counts[k] for k in keys], dtype=np.float64)
        return cls(keys, vals / vals.sum())

    @classmethod
    def uniform(cls, support) -> "Pmf":
        support = tuple(support)
        return cls(support, np.full(len(support), 1.0 / len(support)))


@dataclass(frozen=True, eq=False)
class DiscreteMechanism:
    """Row-stochastic conditional distribution f(z|x) over finite alphabets."""

    inputs: tuple[PlanarPoint, ...]
    outputs: tuple[PlanarPoint, ...]
    matrix: np.ndarray  # [input][output]

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        if m.shape != (len(self.inputs), len(self.outputs)):
            raise ValueError("matrix shape must be (len(inputs), len(outputs))")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite and nonnegative")
        rows = m.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-9):
            raise ValueError("every row must sum to 1 within 1e-9")

    def row(self, i: int) -> np.ndarray:
        return self.matrix[i]

    def to_csv(self, path) -> None:
        """CSV layout: header of output coordinates ("x;y" per column after
        the two input-coordinate columns), then one row per input."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["in_x_m", "in_y_m"] + [f"{z.x!r};{z.y!r}" for z in self.outputs])
            for x, row in zip(self.inputs, self.matrix):
                w.writerow([repr(x.x), repr(x.y)] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "DiscreteMechanism":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError("empty mechanism file")
        header = rows[0]
        outputs = []
        for cell in header[2:]:
            xs, ys = cell.split(";")
            outputs.append(PlanarPoint(float(xs), float(ys)))
        inputs = []
        matrix = []
        for row in rows[1:]:
            inputs.append(PlanarPoint(float(row[0]), float(row[1])))
            matrix.append([float(v) for v in row[2:]])
        return cls(tuple(inputs), tuple(outputs), np.array(matrix))


@dataclass(frozen=True)
class DecisionScenario:
    """Two equiprobable candidate locations the adversary must decide between.

    The prior is fixed at half/half: the perr_min floor is a guarantee only
    for the equal-prior adversary, so unequal priors are rejected rather than
    silently weakening it.
    """

    x: PlanarPoint
    x_prime: PlanarPoint
    prior: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.x == self.x_prime:
            raise ValueError("the two candidate locations must differ")
        if self.prior != (0.5, 0.5):
            raise ValueError("the decision scenario uses the fixed half/half prior")

    @property
    def d(self) -> float:
        return distance(self.x, self.x_prime)


def _as_masses(p):
    if isinstance(p, Pmf):
        return p.support, p.masses
    arr = np.ascontiguousarray(p, dtype=np.float64)
    return None, arr


def multiplicative_distance(p1, p2) -> float:
    """sup over the shared support of |log(p1/p2)|.

    Zero-zero entries contribute 0; a one-sided zero makes the distance
    infinite. Accepts Pmf instances (supports must match) or plain mass
    sequences of equal length.
    """
    s1, m1 = _as_masses(p1)
    s2, m2 = _as_masses(p2)
    if s1 is not None and s2 is not None and s1 != s2:
        raise SupportMismatch("pmf supports differ")
    if m1.shape != m2.shape:
        raise SupportMismatch(f"support sizes differ: {m1.shape[0]} vs {m2.shape[0]}")
    z1 = m1 < ZERO_MASS
    z2 = m2 < ZERO_MASS
    if np.any(z1 != z2):
        return math.inf
    both = ~z1
    if not np.any(both):
        return 0.0
    logs = np.abs(np.log(m1[both]) - np.log(m2[both]))
    return float(logs.max())


def epsilon_star(epsilon: float, d: float) -> float:
    """The distinguishability budget spent over distance d: eps * d."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if d < 0:
        raise ValueError("distance must be nonnegative")
    return epsilon * d


def perr_min(epsilon: float, d: float) -> float:
    """Guaranteed floor on the decision adversary's error: 1/(1 + exp(eps*d))."""
    t = epsilon_star(epsilon, d)
    e = math.exp(-t)
    return e / (1.0 + e)


def perr(f_zx: float, f_zx_prime: float) -> float:
    """Error probability of the optimal decision between two equiprobable
    locations given densities f(z|x) and f(z|x'): min/(sum), in [0, 0.5]."""
    if f_zx < 0 or f_zx_prime < 0:
        raise ValueError("densities must be nonnegative")
    if f_zx < ZERO_MASS and f_zx_prime < ZERO_MASS:
        raise BothZero("observation impossible under both candidates")
    return min(f_zx, f_zx_prime) / (f_zx + f_zx_prime)


def posterior(prior: Pmf, mech: DiscreteMechanism, z_index: int) -> Pmf:
    """Bayes update of ``prior`` after observing output ``z_index``."""
    input_index = {p: i for i, p in enumerate(mech.inputs)}
    try:
        rows = [input_index[k] for k in prior.support]
    except KeyError as exc:
        raise SupportMismatch(f"prior location {exc.args[0]} is not a mechanism input")
    like = mech.matrix[rows, z_index]
    w = like * prior.masses
    total = float(w.sum())
    if total < ZERO_MASS:
        raise ZeroEvidence(f"output {z_index} has zero probability under the prior")
    return Pmf(prior.support, w / total)


def prior_diameter(prior: Pmf, grid=None) -> float:
    """Largest distance between two positive-mass support locations.

    Cell-index supports need ``grid`` to resolve centers; PlanarPoint
    supports are used directly.
    """
    keys = [k for k, m in zip(prior.support, prior.masses) if m > 0]
    if len(keys) <= 1:
        return 0.0
    if isinstance(keys[0], PlanarPoint):
        pts = keys
    else:
        if grid is None:
            raise ValueError("cell-index support needs the grid to resolve locations")
        from geopriv.geo import cell_center

        pts = [cell_center(grid, k) for k in keys]
    best = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            best = max(best, distance(pts[i], pts[j]))
    return best


def tightest_epsilon(mech: DiscreteMechanism) -> float:
    """Smallest eps for which every input pair satisfies
    dM(f(.|x), f(.|x')) <= eps * d(x, x'); inf when a pair has a one-sided zero."""
    n = len(mech.inputs)
    if n < 2:
        raise ValueError("need at least two inputs")
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d = distance(mech.inputs[i], mech.inputs[j])
            if d == 0:
                raise ValueError("inputs must be pairwise distinct locations")
            dm = multiplicative_distance(mech.matrix[i], mech.matrix[j])
            if math.isinf(dm):
                return math.inf
            best = max(best, dm / d)
    return best


def satisfies_geo_ind(mech: DiscreteMechanism, epsilon: float, slack: float = 1e-12) -> bool:
    """Pairwise sup-log-ratio check: dM(row_x, row_x') <= eps*d(x,x') + slack."""
    n = len(mech.inputs)
    for i in range(n):
        for j in range(i + 1, n):
            d = distance(mech.inputs[i], mech.inputs[j])
            dm = multiplicative_distance(mech.matrix[i], mech.matrix[j])
            if dm > epsilon * d + slack:
                return False
    return True


def satisfies_error_bound(mech: DiscreteMechanism, epsilon: float, slack: float = 1e-12) -> bool:
    """Per-triple decision-error check: perr(f(z|x), f(z|x')) >= floor - slack
    for every pair (x, x') and every output z observable from either.

    Outputs impossible under both candidates are vacuous and skipped, mirroring
    the zero-zero convention of the multiplicative distance.
    """
    n = len(mech.inputs)
    for i in range(n):
        for j in range(i + 1, n):
            d = distance(mech.inputs[i], mech.inputs[j])
            floor = perr_min(epsilon, d)
            fi = mech.matrix[i]
            fj = mech.matrix[j]
            for k in range(len(mech.outputs)):
                if fi[k] < ZERO_MASS and fj[k] < ZERO_MASS:
                    continue
                if perr(fi[k], fj[k]) < floor - slack:
                    return False
    return True


@dataclass(frozen=True)
class PosteriorBoundReport:
    """Outcome of the prior/posterior similarity check.

    ``margin`` for an output is eps*d(prior) - dM(posterior, prior); the bound
    holds when every margin is >= -slack. ``worst_output`` indexes the output
    with the smallest margin.
    """

    holds: bool
    epsilon: float
    prior_diameter: float
    worst_output: int
    worst_margin: float
    checked: int
    skipped: int


def posterior_bound_holds(
    prior: Pmf, mech: DiscreteMechanism, epsilon: float, slack: float = 1e-9
) -> PosteriorBoundReport:
    """Check dM(posterior, prior) <= eps * d(prior) for every observable output.

    Assumes the mechanism satisfies eps-geo-indistinguishability (i.e.
    tightest_epsilon(mech) <= eps); outputs with zero evidence under the
    prior are skipped.
    """
    dia = prior_diameter(prior)
    bound = epsilon * dia
    worst_margin = math.inf
    worst_output = -1
    checked = 0
    skipped = 0
    for k in range(len(mech.outputs)):
        try:
            post = posterior(prior, mech, k)
        except ZeroEvidence:
            skipped += 1
            continue
        dm = multiplicative_distance(post, prior)
        margin = bound - dm
        checked += 1
        if margin < worst_margin:
            worst_margin = margin
            worst_output = k
    holds = worst_margin >= -slack
    return PosteriorBoundReport(holds, epsilon, dia, worst_output, worst_margin, checked, skipped)
