"""Posterior sampling for the survey / citizen-science fusion models."""
from .data import FitData, build_fit_data, fit_data_from_replicate
from .diagnostics import effective_sample_size, split_rhat
from .models import MODEL_TABLE, ModelSpec, PCPrior, PriorSpec
from .posterior import Layout, ParameterState, Posterior, PosteriorError
from .predict import RiskPrediction, predict_risk, risk, risk_draws
from .sampler import FitResult, SamplerConfig, SamplerError, find_mode, fit

__all__ = [
    "FitData", "build_fit_data", "fit_data_from_replicate", "effective_sample_size", "split_rhat",
    "MODEL_TABLE", "ModelSpec", "PCPrior", "PriorSpec", "Layout", "ParameterState", "Posterior",
    "PosteriorError", "RiskPrediction", "predict_risk", "risk", "risk_draws", "FitResult",
    "SamplerConfig", "SamplerError", "find_mode", "fit",
]
