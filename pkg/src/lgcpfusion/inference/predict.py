"""Posterior risk maps ``1 - exp(-lambda * area)`` from stored draws."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import GridDomain
from .models import ModelSpec
from .sampler import FitResult

MODES = ("fixed_effects_only", "with_field")


@dataclass(frozen=True)
class RiskPrediction:
    """Per-cell posterior summaries of the risk on ``grid``."""

    grid: GridDomain
    mode: str
    cell_area: float
    median: np.ndarray
    sd: np.ndarray
    width: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def mean_width(self) -> float:
        return float(self.width.mean())


def risk(log_intensity, cell_area: float) -> np.ndarray:
    """Probability of at least one event in a cell of the given area."""
    return -np.expm1(-np.exp(np.asarray(log_intensity, dtype=float)) * cell_area)


def beta_draws(fit: FitResult, n_coef: int) -> np.ndarray:
    """``(n_draws, n_coef)`` matrix of the ``beta[k]`` chains."""
    try:
        return np.column_stack([fit.draws(f"beta[{k}]") for k in range(n_coef)])
    except KeyError as exc:
        raise KeyError(f"fit has no chain for {exc.args[0]}") from None


def risk_draws(fit: FitResult, X, mode: str = "fixed_effects_only",
               cell_area: float = 1.0) -> np.ndarray:
    """``(n_draws, n_cells)`` risk for every kept draw."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    eta = beta_draws(fit, X.shape[1]) @ X.T
    if mode == "with_field":
        if "omega1" not in fit.fields:
            raise KeyError("fit stores no draws of omega1; refit with store_fields=True")
        w = fit.field_draws("omega1")
        if w.shape[1] != X.shape[0]:
            raise ValueError(f"field has {w.shape[1]} cells, design has {X.shape[0]}")
        eta = eta + w
    return risk(eta, cell_area)


def predict_risk(fit: FitResult, model: ModelSpec, covariates: dict, grid: GridDomain,
                 mode: str = "fixed_effects_only", cell_area: float | None = None,
                 covariate_names=None) -> RiskPrediction:
    """Summarise the posterior risk per cell by median, sd and 95% interval.

    ``covariates`` maps names to per-cell values on ``grid``.  The design uses
    the model's ``x_covariates`` unless ``covariate_names`` is given, which
    must then match them.  ``cell_area`` defaults to the grid's cell area.
    """
    if fit.model_id != model.model_id:
        raise ValueError(f"fit is for model {fit.model_id}, not model {model.model_id}")
    names = tuple(model.x_covariates if covariate_names is None else covariate_names)
    unknown = [n for n in names if n not in model.x_covariates]
    if unknown or len(names) != len(model.x_covariates):
        raise KeyError(f"covariates {unknown or names} do not match the fitted formula "
                       f"{tuple(model.x_covariates)}")
    missing = [n for n in names if n not in covariates]
    if missing:
        raise KeyError(f"no covariate raster for {missing}")
    order = [n for n in model.x_covariates]
    cols = [np.ones(grid.n_active)]
    for n in order:
        v = getattr(covariates[n], "values", covariates[n])
        v = np.asarray(v, dtype=float)
        if v.shape != (grid.n_active,):
            raise ValueError(f"covariate {n!r} has shape {v.shape}, grid has {grid.n_active} cells")
        cols.append(v)
    X = np.column_stack(cols)
    area = grid.cell_area if cell_area is None else float(cell_area)
    r = risk_draws(fit, X, mode, area)
    lo, med, hi = np.quantile(r, [0.025, 0.5, 0.975], axis=0)
    return RiskPrediction(grid, mode, area, med, r.std(axis=0), hi - lo, lo, hi)
