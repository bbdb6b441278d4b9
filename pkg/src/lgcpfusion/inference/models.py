"""Model catalogue and prior specification."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import log_expit

from ..landscape import LANDUSE_CLASSES


@dataclass(frozen=True)
class ModelSpec:
    """Which likelihood terms a fusion model switches on.

    ``use_ps``       survey counts inside the selected units
    ``preferential`` Bernoulli likelihood of the unit selections
    ``use_cs``       citizen-science counts
    ``cs_sampling``  sampling effort ``tau = expit(Z alpha + w2)`` with its own field
    ``cs_detection`` detectability ``psi = expit(W nu)``
    ``reporting``    ``none``, ``simple`` (``expit(theta)``) or ``observer``
    """

    model_id: int
    use_ps: bool
    preferential: bool
    use_cs: bool
    cs_sampling: bool
    cs_detection: bool
    reporting: str
    x_covariates: tuple = ("CLOUDCOVER",)
    cs_covariates: tuple = ("DISTANCE",)
    det_covariates: tuple = LANDUSE_CLASSES
    ps_covariates: tuple = ("ELEVGRADIENT", "CLOUDCOVER")
    include_aux_cs_pattern: bool = True
    aux_own_intercept: bool = False
    cs_offset: bool = False

    def __post_init__(self):
        if self.reporting not in ("none", "simple", "observer"):
            raise ValueError(f"unknown reporting variant {self.reporting!r}")
        if not (self.use_ps or self.use_cs):
            raise ValueError("a model needs at least one data source")
        if self.preferential and not self.use_ps:
            raise ValueError("preferential selection requires survey data")
        if (self.cs_sampling or self.cs_detection or self.reporting != "none") and not self.use_cs:
            raise ValueError("thinning factors require citizen-science data")
        if self.model_id in MODEL_TABLE:
            ref = MODEL_TABLE[self.model_id]
            mine = (self.use_ps, self.preferential, self.use_cs, self.cs_sampling,
                    self.cs_detection, self.reporting)
            if mine != ref:
                raise ValueError(f"toggles {mine} do not match model {self.model_id} {ref}")

    @classmethod
    def from_id(cls, model_id: int, **formula) -> "ModelSpec":
        if model_id not in MODEL_TABLE:
            raise ValueError(f"model id must be one of 1..8, got {model_id}")
        return cls(model_id, *MODEL_TABLE[model_id], **formula)

    @property
    def uses_aux(self) -> bool:
        return self.cs_sampling and self.include_aux_cs_pattern

    @property
    def has_field2(self) -> bool:
        return self.cs_sampling

    def describe(self) -> str:
        parts = []
        if self.use_ps:
            parts.append("survey" + (" + preferential selection" if self.preferential else ""))
        if self.use_cs:
            f = [n for n, on in (("sampling", self.cs_sampling), ("detection", self.cs_detection),
                                 (f"{self.reporting} reporting", self.reporting != "none")) if on]
            parts.append("citizen science" + (f" ({', '.join(f)})" if f else ""))
        return f"model {self.model_id}: " + " + ".join(parts)


#        use_ps preferential use_cs sampling detection reporting
MODEL_TABLE = {
    1: (True, False, False, False, False, "none"),
    2: (True, True, False, False, False, "none"),
    3: (False, False, True, False, False, "none"),
    4: (False, False, True, True, False, "none"),
    5: (False, False, True, True, True, "none"),
    6: (True, True, True, True, True, "none"),
    7: (True, True, True, True, True, "simple"),
    8: (True, True, True, True, True, "observer"),
}


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class PCPrior:
    """Penalised-complexity prior on (range, sd) of a Matern field.

    ``P(rho < rho0) = alpha_rho`` and ``P(sigma > sigma0) = alpha_sigma``.
    """

    rho0: float
    alpha_rho: float = 0.5
    sigma0: float = 1.0
    alpha_sigma: float = 0.1

    def __post_init__(self):
        if not (self.rho0 > 0 and self.sigma0 > 0):
            raise ValueError("PC prior reference values must be positive")
        if not (0 < self.alpha_rho < 1 and 0 < self.alpha_sigma < 1):
            raise ValueError("PC prior tail probabilities must lie in (0, 1)")

    @property
    def lam_rho(self) -> float:
        return -np.log(self.alpha_rho) * self.rho0

    @property
    def lam_sigma(self) -> float:
        return -np.log(self.alpha_sigma) / self.sigma0

    def logpdf_rho(self, rho):
        lam = self.lam_rho
        return np.log(lam) - 2.0 * np.log(rho) - lam / rho

    def logpdf_sigma(self, sigma):
        lam = self.lam_sigma
        return np.log(lam) - lam * sigma

    def logpdf_log(self, log_rho, log_sigma) -> float:
        """Joint log density of (log rho, log sigma), Jacobians included."""
        rho, sigma = np.exp(log_rho), np.exp(log_sigma)
        return float(self.logpdf_rho(rho) + log_rho + self.logpdf_sigma(sigma) + log_sigma)

    def median(self) -> tuple[float, float]:
        # rho: P(rho < r) = exp(-lam/r); sigma: exponential
        return self.lam_rho / np.log(2.0), np.log(2.0) / self.lam_sigma


@dataclass(frozen=True)
class PriorSpec:
    field1: PCPrior
    field2: PCPrior
    fixed_precision: float = 0.01
    theta_sd: float = 1.0
    kappa_logit_sd: float = 1.0
    nu_center: tuple = (1.0, -2.0, 1.2, 1.4, 1.8, -3.0)
    nu_sd: float = 1.0

    @classmethod
    def default(cls, diameter: float, **kw) -> "PriorSpec":
        """PC priors with ``P(rho < diameter / 10) = 0.5`` and ``P(sigma > 1) = 0.1``."""
        pc = PCPrior(0.1 * diameter, 0.5, 1.0, 0.1)
        return cls(pc, pc, **kw)

    def with_(self, **kw) -> "PriorSpec":
        return replace(self, **kw)


def normal_logpdf(x, mean, sd):
    z = (np.asarray(x) - mean) / sd
    return -0.5 * z * z - np.log(sd) - 0.5 * np.log(2 * np.pi)


def log_bernoulli_logit(y, eta):
    """``y log p + (1 - y) log(1 - p)`` with ``p = expit(eta)``."""
    return y * log_expit(eta) + (1 - y) * log_expit(-eta)
