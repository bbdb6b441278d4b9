"""Gridded log-Gaussian Cox processes: simulation, thinning and likelihood.

Intensities are piecewise constant over the active cells.  The likelihood
of a pattern is the Poisson count likelihood over cells,

    sum_points log lambda(cell) - sum_cells lambda(cell) * area,

which is exact for piecewise-constant intensities (the ``log(count!)``
constant is dropped).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridDomain, PointPattern

MAX_EXPECTED_POINTS = 1e7


class LikelihoodDomainError(ValueError):
    """A pattern has points where its likelihood has no support."""


@dataclass(frozen=True, eq=False)
class IntensityField:
    """Log intensity (per unit area) on the active cells."""

    log_values: np.ndarray

    def __post_init__(self):
        v = np.array(self.log_values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("log intensity must be finite on every active cell")
        v.setflags(write=False)
        object.__setattr__(self, "log_values", v)

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)


@dataclass(frozen=True, eq=False)
class RetentionField:
    """Per-cell retention probability used for independent thinning."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise ValueError("retention probabilities must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __mul__(self, other: "RetentionField") -> "RetentionField":
        return RetentionField(self.values * other.values)

    @classmethod
    def constant(cls, grid: GridDomain, p: float) -> "RetentionField":
        return cls(np.full(grid.n_active, float(p)))


def simulate_lgcp(intensity: IntensityField, grid: GridDomain,
                  rng: np.random.Generator) -> PointPattern:
    """Poisson counts per cell, points placed uniformly inside each cell."""
    mu = np.exp(intensity.log_values) * grid.cell_area
    if mu.sum() > MAX_EXPECTED_POINTS:
        raise ValueError(f"expected {mu.sum():.3g} points; intensity looks misconfigured")
    counts = rng.poisson(mu)
    cells = np.repeat(np.arange(grid.n_active), counts)
    h = grid.cell_size
    corner = np.array(grid.origin) + grid.ixy[cells] * h
    pts = corner + rng.random((cells.size, 2)) * h
    # guard against round-off pushing a point onto the next cell's edge
    pts = np.minimum(pts, corner + h * (1 - 1e-12))
    return PointPattern(pts)


def thin(pattern: PointPattern, retention: RetentionField, grid: GridDomain,
         rng: np.random.Generator, uniforms=None) -> PointPattern:
    """Keep each point independently with its cell's retention probability.

    ``uniforms`` (one per point) may be supplied to couple several thinnings.
    """
    if len(pattern) == 0:
        return pattern
    cells = grid.locate(pattern.points)
    if np.any(cells < 0):
        raise LikelihoodDomainError("pattern has points outside the active cells")
    u = rng.random(len(pattern)) if uniforms is None else np.asarray(uniforms)
    return pattern.subset(u < retention.values[cells])


def _support_mask(grid: GridDomain, support) -> np.ndarray:
    if support is None:
        return np.ones(grid.n_active, dtype=bool)
    support = np.asarray(support)
    if support.dtype == bool:
        return support
    mask = np.zeros(grid.n_active, dtype=bool)
    mask[support] = True
    return mask


def lgcp_loglik_counts(counts, log_intensity, area: float, mask=None) -> float:
    lv = np.asarray(log_intensity, dtype=float)
    if mask is None:
        return float(counts @ lv - area * np.exp(lv).sum())
    return float(counts[mask] @ lv[mask] - area * np.exp(lv[mask]).sum())


def lgcp_loglik(pattern: PointPattern, log_intensity: IntensityField, grid: GridDomain,
                support=None) -> float:
    """Grid LGCP log-likelihood of ``pattern`` restricted to ``support`` cells."""
    mask = _support_mask(grid, support)
    cells = grid.locate(pattern.points)
    if np.any(cells < 0) or not np.all(mask[cells]):
        raise LikelihoodDomainError("pattern has points outside the likelihood support")
    counts = np.bincount(cells, minlength=grid.n_active).astype(float)
    return lgcp_loglik_counts(counts, log_intensity.log_values, grid.cell_area, mask)


def lgcp_loglik_grad(pattern: PointPattern, log_intensity: IntensityField, grid: GridDomain,
                     support=None) -> np.ndarray:
    """Gradient with respect to the per-cell log intensity: ``count - lambda * area``."""
    mask = _support_mask(grid, support)
    counts = pattern.counts(grid)
    g = counts - np.exp(log_intensity.log_values) * grid.cell_area
    return np.where(mask, g, 0.0)
