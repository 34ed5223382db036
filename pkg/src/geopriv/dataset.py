"""Check-in ingestion, user-level splits, and empirical priors.

Reads the SNAP location check-in format: tab-separated lines of
``user_id  timestamp  latitude  longitude  venue_id`` with ISO 8601
timestamps. Malformed lines are counted, never silently dropped.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from geopriv.errors import EmptyPrior
from geopriv.geo import (
    PROJECTION_WINDOW_DEG,
    GeoPoint,
    Grid,
    PlanarPoint,
    ProjectionRef,
    locate_arrays,
    project_arrays,
)
from geopriv.metrics import Pmf


@dataclass(frozen=True)
class Checkin:
    user_id: int
    timestamp: datetime
    location: GeoPoint
    venue_id: int


@dataclass(frozen=True)
class Region:
    """Latitude/longitude bounding box."""

    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if not (self.min_lat < self.max_lat and self.min_lon < self.max_lon):
            raise ValueError("region bounds must satisfy min < max on both axes")

    def contains(self, lat: float, lon: float) -> bool:
        return self.min_lat <= lat <= self.max_lat and self.min_lon <= lon <= self.max_lon

    @property
    def center(self) -> GeoPoint:
        return GeoPoint((self.min_lat + self.max_lat) / 2, (self.min_lon + self.max_lon) / 2)


# default evaluation region; configurable everywhere it is used
SAN_FRANCISCO = Region(37.55, 37.85, -122.55, -122.25)


@dataclass(frozen=True)
class SplitSpec:
    """User-level train/test split: deterministic seeded shuffle of user ids,
    first ceil(train_fraction * U) users go to train."""

    train_fraction: float = 0.8
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass(frozen=True)
class LoadStats:
    lines: int
    parsed: int
    malformed: int
    in_region: int


def _parse_timestamp(text: str) -> datetime:
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def load_checkins(path, region: Region):
    """Parse a check-in file, keeping records inside ``region`` in file order.

    Returns (checkins, LoadStats). Lines with the wrong field count or
    unparseable fields count as malformed.
    """
    checkins: list[Checkin] = []
    lines = parsed = malformed = 0
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            lines += 1
            parts = line.split("\t")
            if len(parts) != 5:
                malformed += 1
                continue
            try:
                user = int(parts[0])
                ts = _parse_timestamp(parts[1])
                loc = GeoPoint(float(parts[2]), float(parts[3]))
                venue = int(parts[4])
            except (ValueError, OverflowError):
                malformed += 1
                continue
            parsed += 1
            if region.contains(loc.lat, loc.lon):
                checkins.append(Checkin(user, ts, loc, venue))
    return checkins, LoadStats(lines, parsed, malformed, len(checkins))


def split_users(checkins, spec: SplitSpec):
    """Partition check-ins by user into (train, test); no user straddles the split."""
    if not checkins:
        raise ValueError("cannot split an empty check-in list")
    users = np.array(sorted({c.user_id for c in checkins}), dtype=np.int64)
    order = np.random.Generator(np.random.Philox(key=[spec.seed, 0])).permutation(len(users))
    n_train = math.ceil(spec.train_fraction * len(users))
    train_ids = set(users[order[:n_train]].tolist())
    train = [c for c in checkins if c.user_id in train_ids]
    test = [c for c in checkins if c.user_id not in train_ids]
    return train, test


def empirical_prior(checkins, grid: Grid, ref: ProjectionRef, smoothing: float = 0.0) -> Pmf:
    """Cell-frequency prior from check-ins; out-of-grid check-ins are excluded
    from both numerator and denominator.

    ``smoothing`` adds a constant pseudo-count to every grid cell (support
    then covers the whole grid); the default 0 keeps raw frequencies.
    """
    lats = np.array([c.location.lat for c in checkins])
    lons = np.array([c.location.lon for c in checkins])
    in_window = np.abs(lats - ref.origin.lat) < PROJECTION_WINDOW_DEG
    idx = np.full(len(checkins), -1, dtype=np.int64)
    if np.any(in_window):
        xs, ys = project_arrays(lats[in_window], lons[in_window], ref)
        idx[in_window] = locate_arrays(grid, xs, ys)
    idx = idx[idx >= 0]
    if idx.size == 0:
        raise EmptyPrior("no check-in landed inside the grid")
    counts = np.bincount(idx, minlength=grid.n_cells).astype(np.float64)
    if smoothing > 0:
        counts += smoothing
        return Pmf(tuple(range(grid.n_cells)), counts / counts.sum())
    keep = np.flatnonzero(counts > 0)
    return Pmf(tuple(int(k) for k in keep), counts[keep] / counts.sum())


def region_grid(region: Region, ref: ProjectionRef, cell_size: float) -> Grid:
    """Smallest cell-aligned grid covering the projected region."""
    corners_lat = np.array([region.min_lat, region.max_lat])
    corners_lon = np.array([region.min_lon, region.max_lon])
    xs, ys = project_arrays(corners_lat, corners_lon, ref)
    nx = max(1, math.ceil((xs.max() - xs.min()) / cell_size))
    ny = max(1, math.ceil((ys.max() - ys.min()) / cell_size))
    return Grid(PlanarPoint(float(xs.min()), float(ys.min())), cell_size, nx, ny)


def save_prior(path, prior: Pmf, grid: Grid, ref: ProjectionRef, extra: dict | None = None):
    """Write a prior as ``cell_index,mass`` CSV plus a JSON sidecar describing
    the grid and projection (path + '.meta.json')."""
    from geopriv.fileio import atomic_write

    lines = ["cell_index,mass"]
    lines += [f"{k},{float(m)!r}" for k, m in zip(prior.support, prior.masses)]
    atomic_write(path, "\n".join(lines) + "\n")
    meta = {
        "projection": {
            "origin_lat": ref.origin.lat,
            "origin_lon": ref.origin.lon,
            "earth_radius_m": ref.earth_radius,
        },
        "grid": {
            "origin_x_m": grid.origin.x,
            "origin_y_m": grid.origin.y,
            "cell_size_m": grid.cell_size,
            "nx": grid.nx,
            "ny": grid.ny,
        },
    }
    if extra:
        meta.update(extra)
    atomic_write(str(path) + ".meta.json", json.dumps(meta, sort_keys=True, indent=2) + "\n")


def read_prior_csv(path) -> Pmf:
    """Read a ``cell_index,mass`` CSV into a Pmf."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    support = tuple(int(r[0]) for r in rows[1:])
    masses = np.array([float(r[1]) for r in rows[1:]])
    return Pmf(support, masses)


def load_prior(path):
    """Read a prior CSV and its sidecar; returns (Pmf, Grid, ProjectionRef)."""
    prior = read_prior_csv(path)
    with open(str(path) + ".meta.json") as fh:
        meta = json.load(fh)
    g = meta["grid"]
    grid = Grid(PlanarPoint(g["origin_x_m"], g["origin_y_m"]), g["cell_size_m"], g["nx"], g["ny"])
    p = meta["projection"]
    ref = ProjectionRef(GeoPoint(p["origin_lat"], p["origin_lon"]), p["earth_radius_m"])
    return prior, grid, ref
