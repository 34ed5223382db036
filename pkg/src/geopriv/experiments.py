"""Seeded Monte Carlo harness for the privacy/utility evaluations.

Three artifact families: the analytic trade-off table for planar Laplace
(budget, error floor, average loss, 95% radius per epsilon), the decision-
adversary experiment (per-trial error of the optimal two-location adversary
under each noise family, all calibrated to the same average loss), and the
check-in remapping experiment (empirical loss of Laplace-plus-remap against
plain-Laplace analytics).

Trial randomness: each (distance, qavg) pair owns one RandomStream and trial
k reads exactly counter block k of it, so results are bit-identical no matter
how work is scheduled; all families share the pair's draws (common random
numbers), which is also what makes trial-index pairing meaningful.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from geopriv.dataset import (
    SAN_FRANCISCO,
    Region,
    SplitSpec,
    empirical_prior,
    load_checkins,
    region_grid,
    split_users,
)
from geopriv.errors import BothZero, GridMismatch
from geopriv.fileio import atomic_write
from geopriv.geo import PlanarPoint, ProjectionRef
from geopriv.mechanisms import (
    FAMILIES,
    Laplace,
    MechanismParams,
    RemappedMechanism,
    analytic_qavg,
    analytic_r95,
    calibrate_to_qavg,
    density_at_distance,
    radial_ppf,
    remap_arrays,
    sample,
)
from geopriv.metrics import epsilon_star, perr_min
from geopriv.rng import RandomStream

_TWO_PI = 2.0 * math.pi

# uniforms consumed per decision trial: location choice, angle, radial
# quantile, one reserved (pads the trial to a whole counter block)
TRIAL_DRAWS = 4

# stream index namespaces, so different experiments never share a stream
_GOWALLA_PICK_STREAM = 10_000
_GOWALLA_EPS_STREAM = 10_001


@dataclass(frozen=True)
class DecisionExperimentConfig:
    distances: tuple[float, ...]
    qavgs: tuple[float, ...]
    families: tuple[str, ...] = ("laplace", "gaussian", "circular")
    trials: int = 20_000
    seed: int = 42
    histogram_bins: int = 50

    def __post_init__(self):
        object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        object.__setattr__(self, "qavgs", tuple(float(q) for q in self.qavgs))
        object.__setattr__(self, "families", tuple(self.families))
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not self.distances or min(self.distances) <= 0:
            raise ValueError("distances must be positive")
        if not self.qavgs or min(self.qavgs) <= 0:
            raise ValueError("average losses must be positive")
        if len(set(self.distances)) != len(self.distances) or len(set(self.qavgs)) != len(self.qavgs):
            raise ValueError("distances and average losses must be distinct")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown families: {sorted(unknown)}")
        if self.histogram_bins < 1:
            raise ValueError("need at least one histogram bin")


@dataclass(frozen=True)
class TrialRecord:
    family: str
    d: float
    qavg: float
    trial: int
    true_tag: str  # "x" or "x_prime"
    z: PlanarPoint
    perr: float


@dataclass(frozen=True)
class SummaryRow:
    family: str
    d: float
    qavg: float
    avg_perr: float
    min_perr: float
    pct_better: float | None  # None for the Laplace rows
    histogram: tuple[int, ...]


@dataclass(frozen=True)
class TradeoffRow:
    epsilon: float  # inverse meters
    eps_star: float
    perr_min: float
    qavg: float
    r95: float


@dataclass(frozen=True)
class GowallaRow:
    epsilon_inv_km: float
    qavg_remap: float
    r95_remap: float
    qavg_plain: float
    r95_plain: float
    qavg_reduction_pct: float
    r95_reduction_pct: float


def decision_trial(
    params: MechanismParams, x: PlanarPoint, x_prime: PlanarPoint, rnd: RandomStream
) -> TrialRecord:
    """One decision-adversary trial: pick the true location from {x, x'} with
    equal probability, obfuscate it, record the optimal adversary's error.

    Consumes exactly one counter block (TRIAL_DRAWS uniforms), so a loop over
    a fresh stream replays the batched experiment trial for trial.
    """
    if x == x_prime:
        raise ValueError("candidate locations must differ")
    trial = rnd.start_block + rnd.blocks_consumed
    choose_prime = float(rnd.uniforms(1)[0]) >= 0.5
    true_loc = x_prime if choose_prime else x
    z = sample(params, true_loc, rnd)  # consumes angle + radial quantile
    rnd.uniforms(TRIAL_DRAWS - 3)  # discard the reserved draw
    f1 = float(density_at_distance(params, math.hypot(z.x - x.x, z.y - x.y)))
    f2 = float(density_at_distance(params, math.hypot(z.x - x_prime.x, z.y - x_prime.y)))
    if f1 + f2 <= 0.0:
        raise BothZero("z was drawn from one of the candidates; densities cannot both vanish")
    p = min(f1, f2) / (f1 + f2)
    d = math.hypot(x.x - x_prime.x, x.y - x_prime.y)
    qavg = analytic_qavg(params)
    return TrialRecord(
        _family_of(params), d, qavg, trial, "x_prime" if choose_prime else "x", z, p
    )


def _family_of(params: MechanismParams) -> str:
    from geopriv.mechanisms import family_name

    return family_name(params)


def _run_pair(cfg: DecisionExperimentConfig, ordinal: int, d: float, qavg: float, collect: bool):
    """All families for one (d, qavg) pair, sharing the pair's random blocks."""
    u = RandomStream(cfg.seed, ordinal).blocks(cfg.trials, 3)
    choose_prime = u[:, 0] >= 0.5
    theta = _TWO_PI * u[:, 1]
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    true_x = np.where(choose_prime, d, 0.0)

    perrs: dict[str, np.ndarray] = {}
    zs: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for family in cfg.families:
        params = calibrate_to_qavg(family, qavg)
        r = radial_ppf(params, u[:, 2])
        zx = true_x + r * cos_t
        zy = r * sin_t
        f1 = density_at_distance(params, np.hypot(zx, zy))
        f2 = density_at_distance(params, np.hypot(zx - d, zy))
        total = f1 + f2
        if np.any(total <= 0.0):
            raise BothZero("z was drawn from one of the candidates; densities cannot both vanish")
        perrs[family] = np.minimum(f1, f2) / total
        if collect:
            zs[family] = (zx, zy)

    rows = []
    records = []
    lap = perrs.get("laplace")
    for family in cfg.families:
        p = perrs[family]
        pct = None
        if family != "laplace" and lap is not None:
            pct = 100.0 * float(np.mean(p > lap))
        hist = np.histogram(p, bins=cfg.histogram_bins, range=(0.0, 0.5))[0]
        rows.append(
            SummaryRow(family, d, qavg, float(p.mean()), float(p.min()), pct, tuple(int(c) for c in hist))
        )
        if collect:
            zx, zy = zs[family]
            records.extend(
                TrialRecord(
                    family,
                    d,
                    qavg,
                    k,
                    "x_prime" if choose_prime[k] else "x",
                    PlanarPoint(float(zx[k]), float(zy[k])),
                    float(p[k]),
                )
                for k in range(cfg.trials)
            )
    return rows, records


def run_decision_experiment(
    cfg: DecisionExperimentConfig, threads: int = 1, collect_records: bool = False
):
    """Run every (d, qavg) pair; returns (summary rows, trial records or None).

    Rows come out ordered by (d, qavg) pair then family, deterministically for
    a fixed seed regardless of ``threads``.
    """
    pairs = list(itertools.product(cfg.distances, cfg.qavgs))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(
                    lambda item: _run_pair(cfg, item[0], item[1][0], item[1][1], collect_records),
                    enumerate(pairs),
                )
            )
    else:
        results = [
            _run_pair(cfg, i, d, q, collect_records) for i, (d, q) in enumerate(pairs)
        ]
    summaries = [row for rows, _ in results for row in rows]
    if not collect_records:
        return summaries, None
    records = [rec for _, recs in results for rec in recs]
    return summaries, records


def crossover_distances(summaries, statistic: str = "avg_perr") -> dict[tuple[str, float], float | None]:
    """First grid distance at which a family stops beating Laplace, per
    (family, qavg): the marker abscissa for the comparison curves, at the
    experiment's d-grid resolution.

    ``statistic`` picks the curve: "avg_perr" flips where the family's
    average error drops to (or below) Laplace's; "pct_better" flips where the
    family outperforms Laplace in no more than half of the paired trials.
    None when the family stays ahead over the whole range; empty when no
    Laplace rows are present.
    """
    if statistic not in ("avg_perr", "pct_better"):
        raise ValueError(f"unknown statistic {statistic!r}")
    lap = {(r.d, r.qavg): r.avg_perr for r in summaries if r.family == "laplace"}
    if not lap:
        return {}
    rows = {(r.family, r.d, r.qavg): r for r in summaries if r.family != "laplace"}
    out: dict[tuple[str, float], float | None] = {}
    families = sorted({f for f, _, _ in rows})
    qavgs = sorted({q for _, q in lap})
    for family in families:
        for qavg in qavgs:
            cross = None
            for d in sorted(d for d, q in lap if q == qavg):
                row = rows[(family, d, qavg)]
                if statistic == "avg_perr":
                    flipped = row.avg_perr <= lap[(d, qavg)]
                else:
                    flipped = row.pct_better is None or row.pct_better <= 50.0
                if flipped:
                    cross = d
                    break
            out[(family, qavg)] = cross
    return out


def pct_better(records, laplace_records) -> dict[tuple[float, float], float]:
    """Percentage of trial-index-paired trials where the family's error beats
    (strictly exceeds) the Laplace error, per (d, qavg); ties are not better."""
    def keyed(recs):
        out: dict[tuple[float, float], dict[int, float]] = {}
        for r in recs:
            out.setdefault((r.d, r.qavg), {})[r.trial] = r.perr
        return out

    mine = keyed(records)
    base = keyed(laplace_records)
    if set(mine) != set(base):
        raise GridMismatch("the two record sets cover different (d, qavg) grids")
    result = {}
    for key, trials in mine.items():
        ref = base[key]
        if set(trials) != set(ref):
            raise GridMismatch(f"trial indices differ at {key}")
        better = sum(1 for t, p in trials.items() if p > ref[t])
        result[key] = 100.0 * better / len(trials)
    return result


def tradeoff_table(epsilons, r_star: float) -> list[TradeoffRow]:
    """Analytic planar-Laplace trade-off rows for each epsilon (inverse meters)."""
    rows = []
    for eps in epsilons:
        if eps <= 0:
            raise ValueError("epsilon must be positive")
        lap = Laplace(eps)
        rows.append(
            TradeoffRow(
                eps,
                epsilon_star(eps, r_star),
                perr_min(eps, r_star),
                analytic_qavg(lap),
                analytic_r95(lap),
            )
        )
    return rows


@dataclass(frozen=True)
class GowallaExperimentConfig:
    checkins_path: str
    region: Region = SAN_FRANCISCO
    cell_size: float = 100.0
    train_fraction: float = 0.8
    epsilons_inv_km: tuple[float, ...] = (6.67, 4.0, 2.0, 1.0)
    n_checkins: int = 20_000
    seed: int = 42
    weiszfeld_tolerance: float = 1e-3
    weiszfeld_max_iters: int = 200
    smoothing: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "epsilons_inv_km", tuple(float(e) for e in self.epsilons_inv_km))
        if self.n_checkins < 1:
            raise ValueError("need at least one evaluation check-in")
        if min(self.epsilons_inv_km, default=0) <= 0:
            raise ValueError("epsilons must be positive")


def gowalla_remap_experiment(cfg: GowallaExperimentConfig):
    """Empirical loss of Laplace-plus-remap on real check-ins.

    Builds the popularity prior from the train users, then obfuscates a
    without-replacement sample of test check-ins (clamped to availability)
    once per epsilon. Returns (rows, info) where info carries the counts a
    manifest needs.
    """
    checkins, stats = load_checkins(cfg.checkins_path, cfg.region)
    train, test = split_users(checkins, SplitSpec(cfg.train_fraction, cfg.seed))
    ref = ProjectionRef(cfg.region.center)
    grid = region_grid(cfg.region, ref, cfg.cell_size)
    prior = empirical_prior(train, grid, ref, cfg.smoothing)

    from geopriv.geo import PROJECTION_WINDOW_DEG, project_arrays

    lats = np.array([c.location.lat for c in test])
    lons = np.array([c.location.lon for c in test])
    ok = np.abs(lats - ref.origin.lat) < PROJECTION_WINDOW_DEG
    xs, ys = project_arrays(lats[ok], lons[ok], ref)
    if xs.size == 0:
        raise ValueError("no test check-in is usable for evaluation")
    n_eval = min(cfg.n_checkins, xs.size)
    pick = RandomStream(cfg.seed, _GOWALLA_PICK_STREAM).generator.choice(
        xs.size, size=n_eval, replace=False
    )
    tx = xs[pick]
    ty = ys[pick]

    rows = []
    fallbacks = []
    for j, eps_km in enumerate(cfg.epsilons_inv_km):
        eps = eps_km / 1000.0
        rm = RemappedMechanism(
            Laplace(eps), grid, prior, cfg.weiszfeld_tolerance, cfg.weiszfeld_max_iters
        )
        u = RandomStream(cfg.seed, _GOWALLA_EPS_STREAM + j).blocks(n_eval, 2)
        theta = _TWO_PI * u[:, 0]
        r = radial_ppf(Laplace(eps), u[:, 1])
        zpx = tx + r * np.cos(theta)
        zpy = ty + r * np.sin(theta)
        ox, oy, n_fallback = remap_arrays(rm, zpx, zpy)
        fallbacks.append(n_fallback)
        dist = np.hypot(ox - tx, oy - ty)
        qavg_remap = float(dist.mean())
        r95_remap = float(np.percentile(dist, 95.0))
        qavg_plain = analytic_qavg(Laplace(eps))
        r95_plain = analytic_r95(Laplace(eps))
        rows.append(
            GowallaRow(
                eps_km,
                qavg_remap,
                r95_remap,
                qavg_plain,
                r95_plain,
                100.0 * (qavg_plain - qavg_remap) / qavg_plain,
                100.0 * (r95_plain - r95_remap) / r95_plain,
            )
        )
    info = {
        "load": {
            "lines": stats.lines,
            "parsed": stats.parsed,
            "malformed": stats.malformed,
            "in_region": stats.in_region,
        },
        "n_train_checkins": len(train),
        "n_test_checkins": len(test),
        "n_eval": int(n_eval),
        "n_fallback_per_epsilon": fallbacks,
        "grid": {"nx": grid.nx, "ny": grid.ny, "cell_size_m": grid.cell_size},
        "projection": {
            "origin_lat": ref.origin.lat,
            "origin_lon": ref.origin.lon,
            "earth_radius_m": ref.earth_radius,
        },
        "prior_support_cells": len(prior.support),
    }
    return rows, info


# ---------------------------------------------------------------------------
# emission

_STATIC_SCHEMAS = {
    "tradeoff": ("epsilon_inv_km", "eps_star", "perr_min", "qavg_m", "r95_m"),
    "gowalla": (
        "epsilon_inv_km",
        "qavg_remap_m",
        "r95_remap_m",
        "qavg_plain_m",
        "r95_plain_m",
        "qavg_reduction_pct",
        "r95_reduction_pct",
    ),
    "trials": ("family", "d_m", "qavg_m", "trial", "true_tag", "z_x_m", "z_y_m", "perr"),
}

_KIND_OF_TYPE = {
    SummaryRow: "summary",
    TradeoffRow: "tradeoff",
    GowallaRow: "gowalla",
    TrialRecord: "trials",
}


def _summary_header(bins: int):
    return ("family", "d_m", "qavg_m", "avg_perr", "min_perr", "pct_better") + tuple(
        f"bin_{i}" for i in range(bins)
    )


def _row_fields(row):
    if isinstance(row, SummaryRow):
        return (
            row.family,
            row.d,
            row.qavg,
            row.avg_perr,
            row.min_perr,
            row.pct_better,
        ) + row.histogram
    if isinstance(row, TradeoffRow):
        return (row.epsilon * 1000.0, row.eps_star, row.perr_min, row.qavg, row.r95)
    if isinstance(row, GowallaRow):
        return (
            row.epsilon_inv_km,
            row.qavg_remap,
            row.r95_remap,
            row.qavg_plain,
            row.r95_plain,
            row.qavg_reduction_pct,
            row.r95_reduction_pct,
        )
    if isinstance(row, TrialRecord):
        return (row.family, row.d, row.qavg, row.trial, row.true_tag, row.z.x, row.z.y, row.perr)
    raise TypeError(f"cannot emit rows of type {type(row).__name__}")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def render_rows(rows, fmt: str = "csv", kind: str | None = None, histogram_bins: int = 50) -> str:
    """Serialize rows as CSV or JSON text, byte-deterministically.

    ``kind`` (summary | tradeoff | gowalla | trials) is inferred from the
    first row and only required for an empty list, where it picks the
    header; ``histogram_bins`` sizes the empty summary header.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    if rows:
        kind = _KIND_OF_TYPE[type(rows[0])]
    elif kind is None:
        raise ValueError("rendering an empty list needs an explicit kind")
    if kind == "summary":
        header = _summary_header(len(rows[0].histogram) if rows else histogram_bins)
    elif kind in _STATIC_SCHEMAS:
        header = _STATIC_SCHEMAS[kind]
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if fmt == "csv":
        lines = [",".join(header)]
        lines += [",".join(_cell(v) for v in _row_fields(row)) for row in rows]
        return "\n".join(lines) + "\n"
    payload = [dict(zip(header, _row_fields(row))) for row in rows]
    return json.dumps(payload, indent=2) + "\n"


def emit(rows, path, fmt: str = "csv", kind: str | None = None, histogram_bins: int = 50) -> None:
    """Write rows to ``path`` (temp file + rename) as CSV or JSON."""
    atomic_write(path, render_rows(rows, fmt, kind, histogram_bins))
