"""Planar geometry, geographic projection, and uniform grids.

Everything downstream works in a local flat metric: meters east/north of a
reference origin, with plain Euclidean distance. Latitude/longitude enters
only through the equirectangular projection below, which is accurate to well
under 0.1% at city scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from geopriv.errors import IndexOutOfRange, OutOfGrid, OutOfProjectionWindow

EARTH_RADIUS_M = 6_371_000.0
PROJECTION_WINDOW_DEG = 5.0

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError("GeoPoint coordinates must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class PlanarPoint:
    """A location in the local flat metric: meters east (x) / north (y) of the origin."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("PlanarPoint coordinates must be finite")


@dataclass(frozen=True)
class ProjectionRef:
    """Origin and sphere radius fixing the lat/lon -> planar mapping."""

    origin: GeoPoint
    earth_radius: float = EARTH_RADIUS_M

    def __post_init__(self):
        if not (math.isfinite(self.earth_radius) and self.earth_radius > 0):
            raise ValueError("earth_radius must be positive and finite")


def project(g: GeoPoint, ref: ProjectionRef) -> PlanarPoint:
    """Equirectangular projection of ``g`` relative to ``ref.origin``.

    x = (lon - lon0) * cos(lat0) * R * pi/180, y = (lat - lat0) * R * pi/180.
    Valid only near the origin; raises OutOfProjectionWindow when
    |lat - lat0| >= 5 degrees.
    """
    if abs(g.lat - ref.origin.lat) >= PROJECTION_WINDOW_DEG:
        raise OutOfProjectionWindow(
            f"latitude {g.lat} more than {PROJECTION_WINDOW_DEG} deg from origin {ref.origin.lat}"
        )
    scale = ref.earth_radius * _DEG
    x = (g.lon - ref.origin.lon) * math.cos(ref.origin.lat * _DEG) * scale
    y = (g.lat - ref.origin.lat) * scale
    return PlanarPoint(x, y)


def project_arrays(lats: np.ndarray, lons: np.ndarray, ref: ProjectionRef):
    """Vectorized ``project`` for float arrays; returns (xs, ys).

    Same validity window as the scalar version; callers must pre-filter
    points more than 5 degrees of latitude from the origin.
    """
    lats = np.asarray(lats, dtype=np.float64)
    lons = np.asarray(lons, dtype=np.float64)
    if lats.size and np.any(np.abs(lats - ref.origin.lat) >= PROJECTION_WINDOW_DEG):
        raise OutOfProjectionWindow("some latitudes outside the projection window")
    scale = ref.earth_radius * _DEG
    xs = (lons - ref.origin.lon) * math.cos(ref.origin.lat * _DEG) * scale
    ys = (lats - ref.origin.lat) * scale
    return xs, ys


def distance(a: PlanarPoint, b: PlanarPoint) -> float:
    """Euclidean distance in meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class Grid:
    """Uniform grid of square cells; ``origin`` is the southwest corner.

    Cell index k addresses column i = k mod nx and row j = k div nx. Cells
    are half-open [lo, hi) on both axes so every interior point belongs to
    exactly one cell and shared edges go to the larger index.
    """

    origin: PlanarPoint
    cell_size: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (math.isfinite(self.cell_size) and self.cell_size > 0):
            raise ValueError("cell_size must be positive and finite")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid must have at least one cell per axis")

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def max_x(self) -> float:
        return self.origin.x + self.nx * self.cell_size

    @property
    def max_y(self) -> float:
        return self.origin.y + self.ny * self.cell_size


def locate(grid: Grid, p: PlanarPoint) -> int:
    """Index of the cell containing ``p``; raises OutOfGrid outside the bounding box."""
    if not (grid.origin.x <= p.x < grid.max_x and grid.origin.y <= p.y < grid.max_y):
        raise OutOfGrid(f"({p.x}, {p.y}) outside grid bounding box")
    i = int((p.x - grid.origin.x) // grid.cell_size)
    j = int((p.y - grid.origin.y) // grid.cell_size)
    # // can round up onto the far edge when p sits a few ulps below it
    i = min(i, grid.nx - 1)
    j = min(j, grid.ny - 1)
    return j * grid.nx + i


def locate_arrays(grid: Grid, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized ``locate``; out-of-grid points get index -1 instead of an error."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    inside = (
        (xs >= grid.origin.x)
        & (xs < grid.max_x)
        & (ys >= grid.origin.y)
        & (ys < grid.max_y)
    )
    i = np.minimum(((xs - grid.origin.x) // grid.cell_size).astype(np.int64), grid.nx - 1)
    j = np.minimum(((ys - grid.origin.y) // grid.cell_size).astype(np.int64), grid.ny - 1)
    out = j * grid.nx + i
    out[~inside] = -1
    return out


def cell_center(grid: Grid, index: int) -> PlanarPoint:
    """Center point of cell ``index``; raises IndexOutOfRange outside [0, nx*ny)."""
    if not 0 <= index < grid.n_cells:
        raise IndexOutOfRange(f"cell index {index} outside [0, {grid.n_cells})")
    i = index % grid.nx
    j = index // grid.nx
    return PlanarPoint(
        grid.origin.x + (i + 0.5) * grid.cell_size,
        grid.origin.y + (j + 0.5) * grid.cell_size,
    )


def cell_center_arrays(grid: Grid, indices: np.ndarray):
    """Vectorized ``cell_center``; returns (xs, ys)."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= grid.n_cells):
        raise IndexOutOfRange("cell index outside the grid")
    i = indices % grid.nx
    j = indices // grid.nx
    xs = grid.origin.x + (i + 0.5) * grid.cell_size
    ys = grid.origin.y + (j + 0.5) * grid.cell_size
    return xs, ys
