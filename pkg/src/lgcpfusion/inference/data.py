"""Datasets as seen by the fitted models: cell counts plus design matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import GridDomain, PointPattern
from ..landscape import Landscape
from ..observation import observer_weights


@dataclass(frozen=True, eq=False)
class FitData:
    """Everything the log posterior needs, aggregated to the active cells.

    ``unit_matrix`` is ``(m, n)`` with row ``i`` averaging over unit ``i``.
    ``obs_weights`` are the observer weights evaluated at cell centres.
    """

    grid: GridDomain
    X: np.ndarray
    Z_cs: np.ndarray
    W: np.ndarray
    Z_units: np.ndarray
    unit_matrix: np.ndarray
    selected: np.ndarray
    ps_mask: np.ndarray
    y_ps: np.ndarray
    y_cs: np.ndarray
    y_aux: np.ndarray
    obs_weights: np.ndarray
    x_names: tuple = ()

    @property
    def n(self) -> int:
        return self.grid.n_active

    @property
    def area(self) -> float:
        return self.grid.cell_area

    @property
    def n_units(self) -> int:
        return self.unit_matrix.shape[0]

    @property
    def n_observers(self) -> int:
        return self.obs_weights.shape[1]

    def permuted_units(self, perm) -> "FitData":
        perm = np.asarray(perm)
        return FitData(self.grid, self.X, self.Z_cs, self.W, self.Z_units[perm], self.unit_matrix[perm],
                       self.selected[perm], self.ps_mask, self.y_ps, self.y_cs, self.y_aux,
                       self.obs_weights, self.x_names)


def _counts(pattern: PointPattern | None, grid: GridDomain) -> np.ndarray:
    if pattern is None:
        return np.zeros(grid.n_active)
    return pattern.counts(grid).astype(float)


def build_fit_data(landscape: Landscape, model, selected, ps_pattern: PointPattern | None = None,
                   cs_pattern: PointPattern | None = None,
                   aux_pattern: PointPattern | None = None,
                   obs_weight_params=None) -> FitData:
    """Assemble :class:`FitData` from observed patterns and unit selections.

    Survey points must lie inside selected units and are rejected otherwise.
    """
    from ..pointproc import LikelihoodDomainError

    grid = landscape.grid
    units = landscape.units
    selected = np.asarray(selected, dtype=bool)
    if selected.shape != (len(units),):
        raise ValueError(f"expected {len(units)} selection flags, got {selected.shape}")
    m = len(units)
    U = np.zeros((m, grid.n_active))
    ps_mask = np.zeros(grid.n_active, dtype=bool)
    for i, u in enumerate(units):
        U[i, u.cells] = 1.0 / len(u.cells)
        if selected[i]:
            ps_mask[u.cells] = True
    y_ps = _counts(ps_pattern, grid)
    if np.any(y_ps[~ps_mask] > 0):
        raise LikelihoodDomainError("survey pattern has points outside the selected units")
    kw = {} if obs_weight_params is None else {"params": obs_weight_params}
    return FitData(
        grid=grid,
        X=landscape.design(model.x_covariates),
        Z_cs=landscape.design(model.cs_covariates),
        W=landscape.design(model.det_covariates),
        Z_units=landscape.unit_design(model.ps_covariates),
        unit_matrix=U,
        selected=selected.astype(float),
        ps_mask=ps_mask,
        y_ps=y_ps,
        y_cs=_counts(cs_pattern, grid),
        y_aux=_counts(aux_pattern, grid),
        obs_weights=observer_weights(grid.centers, landscape.registry, **kw),
        x_names=tuple(model.x_covariates),
    )


def fit_data_from_replicate(landscape: Landscape, model, replicate, obs_weight_params=None) -> FitData:
    return build_fit_data(landscape, model, replicate.selected, replicate.ps_pattern,
                          replicate.cs_reported, replicate.aux_pattern, obs_weight_params)
