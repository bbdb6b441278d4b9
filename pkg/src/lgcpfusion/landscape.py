"""Study landscapes: grid, survey units, covariates and observers.

:func:`desk_landscape` builds the synthetic landscape used by the default
simulation study: an eight-line network buffered on a 40 x 40 grid, smooth
cloud-cover and elevation-gradient surfaces, distance to a separate road
network, a land-use map with six classes and ten citizen-science observers.
:func:`load_landscape` assembles the same objects from files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .grid import (CovariateRaster, GridDomain, ObserverRegistry, PolylineNetwork,
                   SurveyUnit, build_grid, distance_field, standardize,
                   survey_units_from_network, unit_means, validate_units)

LANDUSE_CLASSES = ("MOUNTAIN", "OPEN", "ROCKY", "URBAN", "WATER")  # FOREST is the baseline


@dataclass(frozen=True, eq=False)
class Landscape:
    grid: GridDomain
    units: tuple
    covariates: dict
    registry: ObserverRegistry
    network: PolylineNetwork | None = None
    roads: PolylineNetwork | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        validate_units(self.grid, self.units)
        for name, r in self.covariates.items():
            if r.values.shape != (self.grid.n_active,):
                raise ValueError(f"covariate {name!r} does not match the grid")

    def cov(self, name: str) -> np.ndarray:
        try:
            return self.covariates[name].values
        except KeyError:
            raise KeyError(f"landscape has no covariate {name!r}; "
                           f"available: {sorted(self.covariates)}") from None

    def design(self, names) -> np.ndarray:
        """Cell design matrix ``[1, cov_1, ..., cov_k]``."""
        cols = [np.ones(self.grid.n_active)] + [self.cov(n) for n in names]
        return np.column_stack(cols)

    def unit_design(self, names) -> np.ndarray:
        """Unit design matrix ``[1, mean cov_1, ...]`` with areal means per unit."""
        cols = [np.ones(len(self.units))] + [unit_means(self.units, self.covariates[n]) for n in names]
        return np.column_stack(cols)


# Polylines of the desk network in unit-square coordinates.
_DESK_LINES = (
    ((0.04, 0.52), (0.34, 0.50)),
    ((0.34, 0.50), (0.64, 0.50)),
    ((0.64, 0.50), (0.96, 0.56)),
    ((0.34, 0.50), (0.28, 0.94)),
    ((0.64, 0.50), (0.72, 0.08)),
    ((0.28, 0.94), (0.80, 0.90)),
    ((0.34, 0.50), (0.10, 0.10)),
    ((0.72, 0.08), (0.96, 0.22)),
)
_DESK_ROADS = (
    ((0.0, 0.30), (0.45, 0.36), (1.0, 0.28)),
    ((0.55, 0.0), (0.50, 0.62), (0.62, 1.0)),
    ((0.0, 0.78), (0.40, 0.72)),
)


def _smooth_surface(xy, rng, n_waves=4, scale=1.0):
    """Sum of random low-frequency plane waves on unit-square coordinates."""
    out = np.zeros(xy.shape[0])
    for _ in range(n_waves):
        theta = rng.uniform(0, 2 * np.pi)
        freq = rng.uniform(0.6, 1.6) * scale
        phase = rng.uniform(0, 2 * np.pi)
        out += np.cos(2 * np.pi * freq * (xy @ [np.cos(theta), np.sin(theta)]) + phase)
    return out


def desk_landscape(seed: int = 20220, nx: int = 40, cell_size: float = 4.0,
                   buffer_cells: float = 1.0, n_observers: int = 10) -> Landscape:
    """Synthetic landscape for the desk-scale simulation study.

    All continuous covariates are standardized over the active cells.  The
    land-use map assigns every active cell to exactly one class; the
    indicator rasters exclude the forest baseline.
    """
    rng = np.random.default_rng(seed)
    size = nx * cell_size
    network = PolylineNetwork(tuple(np.array(p) * size for p in _DESK_LINES),
                              buffer_width=buffer_cells * cell_size)
    roads = PolylineNetwork(tuple(np.array(p) * size for p in _DESK_ROADS), buffer_width=cell_size)
    grid = build_grid((0.0, 0.0, size, size), cell_size, network)
    units = tuple(survey_units_from_network(grid, network))
    xy = grid.centers / size

    cloud = 0.9 * xy[:, 1] + 0.6 * xy[:, 0] + 0.45 * _smooth_surface(xy, rng, 3)
    elev = 0.75 * cloud + 0.65 * _smooth_surface(xy, rng, 3, scale=1.3)
    covs = {
        "CLOUDCOVER": standardize(CovariateRaster("CLOUDCOVER", cloud)),
        "ELEVGRADIENT": standardize(CovariateRaster("ELEVGRADIENT", elev)),
        "DISTANCE": standardize(distance_field(grid, roads, "DISTANCE")),
    }

    # land use: thresholds on two smooth surfaces; cells near roads lean urban
    a = _smooth_surface(xy, rng, 4, scale=2.0) + 0.3 * rng.standard_normal(grid.n_active)
    b = _smooth_surface(xy, rng, 4, scale=2.0)
    road_d = covs["DISTANCE"].values
    cls = np.full(grid.n_active, "FOREST", dtype=object)
    qa = np.quantile(a, [0.15, 0.30, 0.85])
    cls[a < qa[0]] = "WATER"
    cls[(a >= qa[0]) & (a < qa[1])] = "OPEN"
    cls[a >= qa[2]] = "MOUNTAIN"
    rocky = (cls == "MOUNTAIN") & (b > np.quantile(b, 0.5))
    cls[rocky] = "ROCKY"
    urban = (cls == "FOREST") & (road_d < np.quantile(road_d, 0.2)) & (b < np.quantile(b, 0.5))
    cls[urban] = "URBAN"
    for name in LANDUSE_CLASSES:
        covs[name] = CovariateRaster(name, (cls == name).astype(float))

    centroids = np.column_stack([rng.uniform(0.05, 0.95, n_observers),
                                 rng.uniform(0.05, 0.95, n_observers)]) * size
    levels = rng.integers(1, 6, n_observers)
    registry = ObserverRegistry(np.arange(1, n_observers + 1), centroids, levels)
    return Landscape(grid, units, covs, registry, network, roads,
                     meta={"kind": "synthetic", "seed": seed, "nx": nx, "cell_size": cell_size,
                           "buffer_cells": buffer_cells, "n_observers": n_observers})


def load_landscape(spec: dict, base: Path | str = ".") -> Landscape:
    """Build a landscape from a config mapping.

    ``{"kind": "synthetic", ...}`` forwards the remaining keys to
    :func:`desk_landscape`.  ``{"kind": "files", ...}`` expects::

        grid:        ASCII raster whose non-NODATA cells define the domain, or
        network + bounds + cell_size: GeoJSON network buffered by buffer_width
        covariates:  {name: path}  (.asc or .csv raster); "standardize": [names]
        units:       units CSV (default: one unit per network polyline)
        observers:   observer registry CSV
    """
    spec = dict(spec)
    kind = spec.pop("kind", "synthetic")
    if kind == "synthetic":
        return desk_landscape(**spec)
    if kind != "files":
        raise ValueError(f"unknown landscape kind {kind!r}")
    base = Path(base)
    network = None
    if "grid" in spec:
        grid, _ = io.read_raster_ascii(base / spec["grid"])
    else:
        network = io.read_network_geojson(base / spec["network"], float(spec["buffer_width"]))
        grid = build_grid(spec["bounds"], float(spec["cell_size"]), network)
    covs = {}
    for name, path in spec.get("covariates", {}).items():
        path = base / path
        if path.suffix == ".csv":
            covs[name] = io.read_raster_csv(path, grid, name)
        else:
            src_grid, r = io.read_raster_ascii(path, name)
            covs[name] = r if src_grid.same_as(grid) else io.resample_nearest(src_grid, r, grid)
    for name in spec.get("standardize", []):
        covs[name] = standardize(covs[name])
    if "units" in spec:
        units = tuple(io.read_units_csv(base / spec["units"], grid))
    elif network is not None:
        units = tuple(survey_units_from_network(grid, network))
    else:
        raise ValueError("file landscape needs 'units' or a 'network'")
    registry = io.read_registry_csv(base / spec["observers"])
    return Landscape(grid, units, covs, registry, network, None, meta={"kind": "files", **spec})


def save_landscape(landscape: Landscape, directory) -> dict:
    """Write a landscape to files and return the matching ``kind: files`` spec."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    grid = landscape.grid
    io.write_raster_ascii(d / "grid.asc", grid, np.zeros(grid.n_active))
    covs = {}
    for name, r in landscape.covariates.items():
        io.write_raster_csv(d / f"{name}.csv", grid, r.values)
        covs[name] = f"{name}.csv"
    io.write_units_csv(d / "units.csv", grid, landscape.units)
    io.write_registry_csv(d / "observers.csv", landscape.registry)
    if landscape.network is not None:
        io.write_network_geojson(d / "network.geojson", landscape.network)
    return {"kind": "files", "grid": "grid.asc", "covariates": covs,
            "units": "units.csv", "observers": "observers.csv"}
