"""Gridded spatial domain, covariate rasters, survey units and point patterns.

All spatial objects in the package live on a :class:`GridDomain`: a regular
lattice of square cells of which only the *active* cells (e.g. those inside a
buffered line network) belong to the study region.  Active cells are
enumerated in row-major order (``iy`` slowest, ``ix`` fastest) and every
per-cell array in the package is indexed by that enumeration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DomainError(ValueError):
    """Raised when a grid or one of its attached objects is inconsistent."""


class StandardizationError(ValueError):
    pass


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Regular grid with an active-cell mask.

    Attributes:
        nx, ny: Number of columns and rows.
        origin: Lower-left corner ``(x0, y0)`` of the grid.
        cell_size: Side length of a square cell.
        active: Boolean mask of shape ``(ny, nx)``; row 0 is the bottom row.
    """

    nx: int
    ny: int
    origin: tuple[float, float]
    cell_size: float
    active: np.ndarray
    index: np.ndarray = field(init=False, repr=False)
    centers: np.ndarray = field(init=False, repr=False)
    ixy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise DomainError(f"grid needs nx, ny >= 1, got {self.nx}x{self.ny}")
        if not self.cell_size > 0:
            raise DomainError(f"cell_size must be positive, got {self.cell_size}")
        active = np.asarray(self.active, dtype=bool)
        if active.shape != (self.ny, self.nx):
            raise DomainError(
                f"mask shape {active.shape} does not match grid ({self.ny}, {self.nx})")
        if not active.any():
            raise DomainError("grid has no active cells")
        object.__setattr__(self, "active", _readonly(active, bool))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

        index = np.full((self.ny, self.nx), -1, dtype=np.int64)
        iy, ix = np.nonzero(active)
        index[iy, ix] = np.arange(iy.size)
        h = self.cell_size
        centers = np.column_stack([self.origin[0] + (ix + 0.5) * h,
                                   self.origin[1] + (iy + 0.5) * h])
        object.__setattr__(self, "index", _readonly(index, np.int64))
        object.__setattr__(self, "centers", _readonly(centers))
        object.__setattr__(self, "ixy", _readonly(np.column_stack([ix, iy]), np.int64))

    @property
    def n_active(self) -> int:
        return int(self.ixy.shape[0])

    @property
    def cell_area(self) -> float:
        return self.cell_size ** 2

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return (x0, y0, x0 + self.nx * self.cell_size, y0 + self.ny * self.cell_size)

    def diameter(self) -> float:
        """Diagonal of the bounding box of the active cell centres (plus one cell)."""
        lo = self.centers.min(axis=0)
        hi = self.centers.max(axis=0)
        return float(np.hypot(*(hi - lo)) + self.cell_size)

    def locate(self, points) -> np.ndarray:
        """Active-cell index of each point, ``-1`` outside the active region.

        Cells are half-open: a point belongs to ``[x0 + i*h, x0 + (i+1)*h)``.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        h = self.cell_size
        ix = np.floor((pts[:, 0] - self.origin[0]) / h).astype(np.int64)
        iy = np.floor((pts[:, 1] - self.origin[1]) / h).astype(np.int64)
        inside = (ix >= 0) & (ix < self.nx) & (iy >= 0) & (iy < self.ny)
        out = np.full(pts.shape[0], -1, dtype=np.int64)
        out[inside] = self.index[iy[inside], ix[inside]]
        return out

    def to_array(self, values, fill=np.nan) -> np.ndarray:
        """Scatter per-active-cell values into a ``(ny, nx)`` array."""
        values = np.asarray(values, dtype=float)
        out = np.full((self.ny, self.nx), fill, dtype=float)
        out[self.ixy[:, 1], self.ixy[:, 0]] = values
        return out

    def same_as(self, other: "GridDomain") -> bool:
        return (self.nx == other.nx and self.ny == other.ny
                and np.allclose(self.origin, other.origin)
                and np.isclose(self.cell_size, other.cell_size)
                and np.array_equal(self.active, other.active))


@dataclass(frozen=True, eq=False)
class CovariateRaster:
    """A covariate with one value per active cell."""

    name: str
    values: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        v = _readonly(self.values)
        if v.ndim != 1:
            raise DomainError(f"raster {self.name!r} must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise DomainError(f"raster {self.name!r} has undefined values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class PolylineNetwork:
    polylines: tuple
    buffer_width: float = 1.0

    def __post_init__(self):
        lines = tuple(_readonly(p) for p in self.polylines)
        for k, p in enumerate(lines):
            if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 2:
                raise DomainError(f"polyline {k} needs at least two (x, y) vertices")
        if not self.buffer_width > 0:
            raise DomainError("buffer_width must be positive")
        object.__setattr__(self, "polylines", lines)

    def segments(self) -> np.ndarray:
        """All segments as an ``(m, 2, 2)`` array."""
        return np.concatenate([np.stack([p[:-1], p[1:]], axis=1) for p in self.polylines])

    def translated(self, dx: float, dy: float) -> "PolylineNetwork":
        return PolylineNetwork(tuple(p + [dx, dy] for p in self.polylines), self.buffer_width)


@dataclass(frozen=True, eq=False)
class SurveyUnit:
    """A surveyable area (one buffered line) given as a set of active cells."""

    id: str
    cells: np.ndarray

    def __post_init__(self):
        cells = np.unique(np.asarray(self.cells, dtype=np.int64))
        if cells.size == 0:
            raise DomainError(f"survey unit {self.id!r} has no cells")
        object.__setattr__(self, "cells", _readonly(cells, np.int64))

    @property
    def size(self) -> int:
        return int(self.cells.size)


@dataclass(frozen=True, eq=False)
class PointPattern:
    """Event locations with optional integer observer marks."""

    points: np.ndarray
    marks: np.ndarray | None = None

    def __post_init__(self):
        pts = _readonly(np.asarray(self.points, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "points", pts)
        if self.marks is not None:
            marks = _readonly(self.marks, np.int64)
            if marks.shape != (pts.shape[0],):
                raise DomainError("marks must have one entry per point")
            object.__setattr__(self, "marks", marks)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @classmethod
    def empty(cls, marked: bool = False) -> "PointPattern":
        return cls(np.empty((0, 2)), np.empty(0, dtype=np.int64) if marked else None)

    def subset(self, keep) -> "PointPattern":
        keep = np.asarray(keep)
        marks = None if self.marks is None else self.marks[keep]
        return PointPattern(self.points[keep], marks)

    def with_marks(self, marks) -> "PointPattern":
        return PointPattern(self.points, marks)

    def counts(self, grid: GridDomain) -> np.ndarray:
        """Number of points in each active cell; raises if a point is outside."""
        cells = grid.locate(self.points)
        if np.any(cells < 0):
            bad = int(np.flatnonzero(cells < 0)[0])
            raise DomainError(f"point {bad} at {tuple(self.points[bad])} is outside the active region")
        return np.bincount(cells, minlength=grid.n_active).astype(float)

    @staticmethod
    def union(*patterns: "PointPattern") -> "PointPattern":
        pts = np.concatenate([p.points for p in patterns]) if patterns else np.empty((0, 2))
        if patterns and all(p.marks is not None for p in patterns):
            return PointPattern(pts, np.concatenate([p.marks for p in patterns]))
        return PointPattern(pts)


@dataclass(frozen=True, eq=False)
class ObserverRegistry:
    """Citizen-science observers: activity centroid and activity level 1-5."""

    ids: np.ndarray
    centroids: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        ids = _readonly(self.ids, np.int64)
        cen = _readonly(np.asarray(self.centroids, dtype=float).reshape(-1, 2))
        lev = _readonly(self.levels, np.int64)
        if not (ids.shape[0] == cen.shape[0] == lev.shape[0]):
            raise DomainError("observer registry columns differ in length")
        if np.unique(ids).size != ids.size:
            raise DomainError("observer ids must be unique")
        if np.any((lev < 1) | (lev > 5)):
            raise DomainError("activity levels must lie in 1..5")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "centroids", cen)
        object.__setattr__(self, "levels", lev)

    def __len__(self) -> int:
        return int(self.ids.size)

    def position(self, observer_id) -> int:
        hits = np.flatnonzero(self.ids == observer_id)
        if hits.size == 0:
            raise DomainError(f"unknown observer id {observer_id}")
        return int(hits[0])


# ---------------------------------------------------------------------------
# geometry helpers


def point_segment_distance(points, segments) -> np.ndarray:
    """Distance from each point to the nearest of the given segments.

    Args:
        points: ``(n, 2)`` array.
        segments: ``(m, 2, 2)`` array of segment endpoints.

    Returns:
        ``(n,)`` array of minimum Euclidean distances.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    seg = np.asarray(segments, dtype=float).reshape(-1, 2, 2)
    best = np.full(pts.shape[0], np.inf)
    for a, b in seg:  # m is small (network segments); vectorised over points
        ab = b - a
        denom = float(ab @ ab)
        ap = pts - a
        if denom == 0.0:
            t = np.zeros(pts.shape[0])
        else:
            t = np.clip(ap @ ab / denom, 0.0, 1.0)
        d = np.hypot(ap[:, 0] - t * ab[0], ap[:, 1] - t * ab[1])
        np.minimum(best, d, out=best)
    return best


def _segment_owner(points, network: PolylineNetwork) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest polyline for each point, and that distance."""
    dists = np.column_stack([
        point_segment_distance(points, np.stack([p[:-1], p[1:]], axis=1))
        for p in network.polylines
    ])
    return np.argmin(dists, axis=1), dists.min(axis=1)


# ---------------------------------------------------------------------------
# operations


def build_grid(bounds: Sequence[float], cell_size: float,
               mask_source: PolylineNetwork | None = None) -> GridDomain:
    """Discretize a rectangle into square cells.

    ``bounds`` is ``(xmin, ymin, xmax, ymax)``.  With a network as
    ``mask_source`` a cell is active when its centre lies within
    ``buffer_width`` of some polyline; with ``None`` every cell is active.
    """
    xmin, ymin, xmax, ymax = map(float, bounds)
    if not (xmax > xmin and ymax > ymin):
        raise DomainError(f"degenerate bounds {bounds}")
    if not cell_size > 0:
        raise DomainError("cell_size must be positive")
    nx = int(np.ceil((xmax - xmin) / cell_size - 1e-9))
    ny = int(np.ceil((ymax - ymin) / cell_size - 1e-9))
    if mask_source is None:
        active = np.ones((ny, nx), dtype=bool)
    else:
        iy, ix = np.mgrid[0:ny, 0:nx]
        centers = np.column_stack([xmin + (ix.ravel() + 0.5) * cell_size,
                                   ymin + (iy.ravel() + 0.5) * cell_size])
        d = point_segment_distance(centers, mask_source.segments())
        active = (d <= mask_source.buffer_width).reshape(ny, nx)
        if not active.any():
            raise DomainError("buffer does not cover any cell centre; the domain is empty")
    return GridDomain(nx, ny, (xmin, ymin), float(cell_size), active)


def distance_field(grid: GridDomain, features, name: str = "distance") -> CovariateRaster:
    """Euclidean distance from each active cell centre to the nearest feature.

    ``features`` is a :class:`PolylineNetwork` or an ``(k, 2)`` point array.
    """
    if isinstance(features, PolylineNetwork):
        d = point_segment_distance(grid.centers, features.segments())
    else:
        pts = np.asarray(features, dtype=float).reshape(-1, 2)
        if pts.shape[0] == 0:
            raise DomainError("distance_field needs at least one feature")
        diff = grid.centers[:, None, :] - pts[None, :, :]
        d = np.sqrt((diff ** 2).sum(axis=2)).min(axis=1)
    return CovariateRaster(name, d)


def standardize(raster: CovariateRaster) -> CovariateRaster:
    """Centre and scale to mean 0, population sd 1 over the active cells."""
    v = raster.values
    if np.unique(v).size < 2:
        raise StandardizationError(f"raster {raster.name!r} is constant and cannot be standardized")
    mu = v.mean()
    sd = np.sqrt(np.mean((v - mu) ** 2))
    return CovariateRaster(raster.name, (v - mu) / sd, standardized=True)


def survey_units_from_network(grid: GridDomain, network: PolylineNetwork,
                              ids: Sequence[str] | None = None) -> list[SurveyUnit]:
    """Partition the active cells among polylines by nearest polyline.

    Each polyline becomes one survey unit; polylines that own no cell centre
    are dropped.
    """
    owner, _ = _segment_owner(grid.centers, network)
    ids = list(ids) if ids is not None else [f"P{k + 1}" for k in range(len(network.polylines))]
    units = []
    for k in range(len(network.polylines)):
        cells = np.flatnonzero(owner == k)
        if cells.size:
            units.append(SurveyUnit(ids[k], cells))
    return units


def validate_units(grid: GridDomain, units: Sequence[SurveyUnit]) -> None:
    seen = np.zeros(grid.n_active, dtype=bool)
    for u in units:
        if u.cells.min() < 0 or u.cells.max() >= grid.n_active:
            raise DomainError(f"unit {u.id!r} references an inactive cell")
        if seen[u.cells].any():
            raise DomainError(f"unit {u.id!r} overlaps another unit")
        seen[u.cells] = True


def unit_membership(grid: GridDomain, units: Sequence[SurveyUnit]) -> np.ndarray:
    """Per-cell unit position (index into ``units``), ``-1`` if in no unit."""
    validate_units(grid, units)
    owner = np.full(grid.n_active, -1, dtype=np.int64)
    for k, u in enumerate(units):
        owner[u.cells] = k
    return owner


def unit_means(units: Sequence[SurveyUnit], raster: CovariateRaster) -> np.ndarray:
    """Arithmetic mean of a raster over each unit's cells."""
    return np.array([raster.values[u.cells].mean() for u in units])
