"""Observation processes and the scenario generator.

Citizen-science (CS) reports arise from the true pattern by three
independent thinnings: sampling effort ``tau``, detectability ``psi`` and
reporting ``delta``.  Professional surveys select whole survey units, with
probabilities that may depend on unit covariates and on the ecological
field, and record every event inside a selected unit.

Random streams
--------------
Every replicate owns ``SeedSequence(master_seed, spawn_key=(0, replicate))``
and draws its stages from child keys ``(0, replicate, stage)`` with stage 0 for
the true pattern, 1 for the CS chain and auxiliary pattern, 2 for unit
selection.  No stream depends on the scenario, so the four scenarios of one
replicate share the true pattern and all uniforms (common random numbers).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.special import expit, log_expit, logit

from . import io
from .field import MaternParams, areal_logit_average, build_precision
from .grid import GridDomain, ObserverRegistry, PointPattern
from .landscape import LANDUSE_CLASSES, Landscape
from .pointproc import IntensityField, RetentionField, simulate_lgcp, thin

WILLINGNESS = {"low": (2.0, 5.0), "high": (5.0, 1.5)}
SCENARIOS = {
    1: ("high", "random"),
    2: ("high", "preferential"),
    3: ("low", "random"),
    4: ("low", "preferential"),
}


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(master_seed, key...)``."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key)))


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ObserverWeightParams:
    """Logistic observer score ``base + dist_slope * distance + level_effects[level - 1]``."""

    base: float = 10.0
    dist_slope: float = -0.3
    level_effects: tuple = (0.0, 0.5, 1.0, 1.5, 2.0)


@dataclass(frozen=True)
class CsProcessParams:
    alpha: tuple = (-4.0, -2.0)
    nu_det: tuple = (1.0, -2.0, 1.2, 1.4, 1.8, -3.0)
    reporting: str = "observer"
    theta: float = 0.0
    kappa: tuple | None = None
    weights: ObserverWeightParams = ObserverWeightParams()

    def __post_init__(self):
        if self.reporting not in ("none", "simple", "observer"):
            raise ValueError(f"unknown reporting variant {self.reporting!r}")
        if self.kappa is not None and any(not 0 <= k <= 1 for k in self.kappa):
            raise ValueError("kappa values must lie in [0, 1]")


@dataclass(frozen=True)
class SurveyProcessParams:
    mode: str = "preferential"
    p: float = 0.25
    gamma: tuple = (-2.5, -1.5, 3.5)
    zeta: float = 0.0
    include_field: bool = False

    def __post_init__(self):
        if self.mode not in ("random", "preferential"):
            raise ValueError(f"unknown survey mode {self.mode!r}")
        if self.mode == "random" and not 0 < self.p <= 1:
            raise ValueError("random selection probability must lie in (0, 1]")


# ---------------------------------------------------------------------------
# thinning components


def cs_sampling_retention(design, alpha, omega2=None, link: str = "logit") -> RetentionField:
    """Probability that citizen scientists visit each cell.

    ``link="logit"`` is the model used for inference, ``expit(Z alpha + w2)``;
    ``link="visit"`` is the simulation transform ``1 - exp(-exp(Z alpha + w2))``,
    the probability of at least one visit from a Poisson effort process.
    """
    eta = np.asarray(design, dtype=float) @ np.asarray(alpha, dtype=float)
    if omega2 is not None:
        eta = eta + np.asarray(getattr(omega2, "values", omega2), dtype=float)
    if link == "logit":
        return RetentionField(expit(eta))
    if link == "visit":
        return RetentionField(-np.expm1(-np.exp(eta)))
    raise ValueError(f"unknown link {link!r}")


def detection_prob(indicators, nu_det) -> RetentionField:
    """``expit(nu_0 + indicators @ nu_1:)`` for mutually exclusive 0/1 indicators."""
    ind = np.asarray(indicators, dtype=float)
    if ind.ndim == 1:
        ind = ind[:, None]
    if np.any((ind != 0) & (ind != 1)):
        raise ValueError("land-use indicators must be 0/1")
    multi = np.flatnonzero(ind.sum(axis=1) > 1)
    if multi.size:
        raise ValueError(f"cell {int(multi[0])} has more than one land-use class")
    nu = np.asarray(nu_det, dtype=float)
    return RetentionField(expit(nu[0] + ind @ nu[1:]))


def observer_log_scores(points, registry: ObserverRegistry,
                        params: ObserverWeightParams = ObserverWeightParams()) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    d = np.sqrt(((pts[:, None, :] - registry.centroids[None, :, :]) ** 2).sum(axis=2))
    level = np.asarray(params.level_effects, dtype=float)[registry.levels - 1]
    return log_expit(params.base + params.dist_slope * d + level[None, :])


def observer_weights(points, registry: ObserverRegistry,
                     params: ObserverWeightParams = ObserverWeightParams()) -> np.ndarray:
    """Probability that a report at each location comes from each observer.

    Logistic scores normalised over observers; rows sum to one.
    """
    if len(registry) == 0:
        raise ValueError("observer registry is empty")
    s = observer_log_scores(points, registry, params)
    s -= s.max(axis=1, keepdims=True)
    w = np.exp(s)
    return w / w.sum(axis=1, keepdims=True)


def reporting_field(variant: str, grid: GridDomain, theta: float = 0.0, kappa=None,
                    registry: ObserverRegistry | None = None, weights=None,
                    weight_params: ObserverWeightParams = ObserverWeightParams()) -> RetentionField:
    """Reporting probability ``delta`` per cell.

    ``none``: 1; ``simple``: ``expit(theta)``; ``observer``: the observer
    weights at each cell centre averaged against the per-observer
    propensities ``kappa``.
    """
    if variant == "none":
        return RetentionField.constant(grid, 1.0)
    if variant == "simple":
        return RetentionField.constant(grid, float(expit(theta)))
    if variant != "observer":
        raise ValueError(f"unknown reporting variant {variant!r}")
    kappa = np.asarray(kappa, dtype=float)
    if np.any((kappa < 0) | (kappa > 1)):
        raise ValueError("kappa values must lie in [0, 1]")
    if weights is None:
        weights = observer_weights(grid.centers, registry, weight_params)
    return RetentionField(np.clip(weights @ kappa, 0.0, 1.0))


def draw_willingness(level: str, n_observers: int, rng: np.random.Generator) -> np.ndarray:
    """Per-observer reporting propensities: Beta(2, 5) for low, Beta(5, 1.5) for high.

    Drawn by inverting the Beta cdf at uniforms, so that low and high draws
    from the same stream are ordered observer by observer.
    """
    if n_observers < 1:
        raise ValueError("need at least one observer")
    a, b = WILLINGNESS[level]
    return stats.beta.ppf(rng.random(n_observers), a, b)


def select_survey_units(unit_design, params: SurveyProcessParams, rng: np.random.Generator,
                        omega1=None, units=None, uniforms=None) -> tuple[np.ndarray, np.ndarray]:
    """Independent Bernoulli selection of survey units.

    Returns the boolean selection vector and the selection probabilities.
    """
    Z = np.asarray(unit_design, dtype=float)
    m = Z.shape[0]
    if params.mode == "random":
        probs = np.full(m, params.p)
    else:
        eta = Z @ np.asarray(params.gamma, dtype=float)
        if params.include_field and params.zeta != 0.0:
            w = np.asarray(getattr(omega1, "values", omega1), dtype=float)
            eta = eta + params.zeta * np.array([areal_logit_average(w, u) for u in units])
        probs = expit(eta)
    u = rng.random(m) if uniforms is None else np.asarray(uniforms)
    return u < probs, probs


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class ScenarioSpec:
    """Truth and observation settings for one cell of the scenario design."""

    willingness: str = "high"
    survey_mode: str = "random"
    beta: tuple = (-2.0, 0.75)
    rho1: float = 1.0
    var1: float = 0.3
    alpha: tuple = (-4.0, -2.0)
    rho2: float = 100.0
    var2: float = 1.3
    nu_det: tuple = (1.0, -2.0, 1.2, 1.4, 1.8, -3.0)
    observer_weights: ObserverWeightParams = ObserverWeightParams()
    gamma: tuple = (-2.5, -1.5, 3.5)
    zeta: float = 0.0
    include_field: bool = False
    random_p: float = 0.25
    x_covariates: tuple = ("CLOUDCOVER",)
    cs_covariates: tuple = ("DISTANCE",)
    det_covariates: tuple = LANDUSE_CLASSES
    ps_covariates: tuple = ("ELEVGRADIENT", "CLOUDCOVER")
    kappa_override: float | None = None
    n_replicates: int = 20
    seed: int = 1

    def __post_init__(self):
        if self.willingness not in WILLINGNESS:
            raise ValueError(f"willingness must be 'high' or 'low', got {self.willingness!r}")
        if self.survey_mode not in ("random", "preferential"):
            raise ValueError(f"survey mode must be 'random' or 'preferential', got {self.survey_mode!r}")

    @classmethod
    def for_scenario(cls, scenario: int, **overrides) -> "ScenarioSpec":
        willingness, mode = SCENARIOS[int(scenario)]
        return cls(willingness=willingness, survey_mode=mode, **overrides)

    @property
    def scenario_id(self) -> int:
        for k, v in SCENARIOS.items():
            if v == (self.willingness, self.survey_mode):
                return k
        raise AssertionError

    def survey_params(self) -> SurveyProcessParams:
        return SurveyProcessParams(mode=self.survey_mode, p=self.random_p, gamma=self.gamma,
                                   zeta=self.zeta, include_field=self.include_field)

    def truth(self) -> dict:
        """True values of the parameters shared by the fitted models."""
        g = self.gamma if self.survey_mode == "preferential" else (float(logit(self.random_p)), 0.0, 0.0)
        z = self.zeta if self.survey_mode == "preferential" else 0.0
        out = {f"beta[{k}]": float(v) for k, v in enumerate(self.beta)}
        out.update({f"gamma[{k}]": float(v) for k, v in enumerate(g)})
        out["zeta"] = float(z)
        out.update({f"alpha[{k}]": float(v) for k, v in enumerate(self.alpha)})
        out.update({f"nu[{k}]": float(v) for k, v in enumerate(self.nu_det)})
        out.update({"rho1": self.rho1, "sigma1": float(np.sqrt(self.var1)),
                    "rho2": self.rho2, "sigma2": float(np.sqrt(self.var2))})
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        if "observer_weights" in d and isinstance(d["observer_weights"], dict):
            d["observer_weights"] = ObserverWeightParams(**{k: tuple(v) if isinstance(v, list) else v
                                                            for k, v in d["observer_weights"].items()})
        for k, v in list(d.items()):
            if isinstance(v, list):
                d[k] = tuple(v)
        return cls(**d)


@dataclass(eq=False)
class ScenarioReplicate:
    """One synthetic dataset with every intermediate artefact of its generation."""

    scenario: int
    replicate: int
    seed: int
    omega1: np.ndarray
    omega2: np.ndarray
    true_pattern: PointPattern
    cs_sampled: PointPattern
    cs_detected: PointPattern
    cs_reported: PointPattern
    aux_pattern: PointPattern
    selected: np.ndarray
    selection_probs: np.ndarray
    unit_ids: tuple
    ps_pattern: PointPattern
    kappa: np.ndarray
    truth: dict = field(default_factory=dict)

    @property
    def cs_pattern(self) -> PointPattern:
        return self.cs_reported


def simulate_replicate(spec: ScenarioSpec, landscape: Landscape, replicate: int,
                       master_seed: int | None = None) -> ScenarioReplicate:
    """Generate one replicate of the scenario described by ``spec``."""
    seed = spec.seed if master_seed is None else int(master_seed)
    grid = landscape.grid
    area_cells = grid.n_active

    # stage 0: ecological truth
    rng0 = stream(seed, 0, replicate, 0)
    op1 = build_precision(grid, MaternParams(spec.rho1, np.sqrt(spec.var1)))
    omega1 = op1.sample(rng0)
    log_lam = landscape.design(spec.x_covariates) @ np.asarray(spec.beta) + omega1
    true = simulate_lgcp(IntensityField(log_lam), grid, rng0)

    # stage 1: citizen science
    rng1 = stream(seed, 0, replicate, 1)
    op2 = build_precision(grid, MaternParams(spec.rho2, np.sqrt(spec.var2)))
    omega2 = op2.sample(rng1)
    n_true = len(true)
    u_samp, u_det, u_obs, u_rep = rng1.random((4, n_true))
    kappa_u = rng1.random(len(landscape.registry))
    eta_effort = landscape.design(spec.cs_covariates) @ np.asarray(spec.alpha) + omega2
    aux = simulate_lgcp(IntensityField(eta_effort), grid, rng1)

    tau = cs_sampling_retention(landscape.design(spec.cs_covariates), spec.alpha, omega2, link="visit")
    ind = np.column_stack([landscape.cov(n) for n in spec.det_covariates])
    psi = detection_prob(ind, spec.nu_det)

    cells = grid.locate(true.points)
    keep_s = u_samp < tau.values[cells]
    keep_d = keep_s & (u_det < psi.values[cells])
    if spec.kappa_override is not None:
        kappa = np.full(len(landscape.registry), float(spec.kappa_override))
    else:
        a, b = WILLINGNESS[spec.willingness]
        kappa = stats.beta.ppf(kappa_u, a, b)
    w = observer_weights(true.points, landscape.registry, spec.observer_weights)
    observer = (w.cumsum(axis=1) < u_obs[:, None]).sum(axis=1)
    observer = np.minimum(observer, len(landscape.registry) - 1)
    keep_r = keep_d & (u_rep < kappa[observer])
    marks = landscape.registry.ids[observer]
    sampled = true.subset(keep_s)
    detected = true.subset(keep_d)
    reported = PointPattern(true.points[keep_r], marks[keep_r])

    # stage 2: professional surveys
    rng2 = stream(seed, 0, replicate, 2)
    unit_u = rng2.random(len(landscape.units))
    Zu = landscape.unit_design(spec.ps_covariates)
    selected, probs = select_survey_units(Zu, spec.survey_params(), rng2, omega1=omega1,
                                          units=landscape.units, uniforms=unit_u)
    in_selected = np.zeros(area_cells, dtype=bool)
    for u, s in zip(landscape.units, selected):
        if s:
            in_selected[u.cells] = True
    ps = true.subset(in_selected[cells]) if n_true else PointPattern.empty()

    truth = spec.truth()
    truth.update({f"kappa[{j}]": float(k) for j, k in enumerate(kappa)})
    # a single reporting probability matching the average over the domain
    w_cells = observer_weights(grid.centers, landscape.registry, spec.observer_weights)
    truth["theta"] = float(logit(np.mean(w_cells @ kappa)))
    return ScenarioReplicate(spec.scenario_id, replicate, seed, omega1, omega2, true, sampled,
                             detected, reported, aux, selected, probs,
                             tuple(u.id for u in landscape.units), ps, kappa, truth)


# ---------------------------------------------------------------------------
# serialisation


def save_replicate(rep: ScenarioReplicate, directory, grid: GridDomain) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in ("true_pattern", "cs_sampled", "cs_detected", "cs_reported", "aux_pattern", "ps_pattern"):
        io.write_pattern(d / f"{name}.csv", getattr(rep, name))
    io.write_raster_csv(d / "omega1.csv", grid, rep.omega1)
    io.write_raster_csv(d / "omega2.csv", grid, rep.omega2)
    manifest = {
        "scenario": rep.scenario, "replicate": rep.replicate, "seed": rep.seed,
        "unit_ids": list(rep.unit_ids), "selected": [bool(s) for s in rep.selected],
        "selection_probs": [float(p) for p in rep.selection_probs],
        "kappa": [float(k) for k in rep.kappa], "truth": rep.truth,
        "counts": {"true": len(rep.true_pattern), "cs_sampled": len(rep.cs_sampled),
                   "cs_detected": len(rep.cs_detected), "cs_reported": len(rep.cs_reported),
                   "aux": len(rep.aux_pattern), "ps": len(rep.ps_pattern)},
    }
    (d / "replicate.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))


def load_replicate(directory, grid: GridDomain) -> ScenarioReplicate:
    d = Path(directory)
    m = json.loads((d / "replicate.json").read_text())
    pats = {name: io.read_pattern(d / f"{name}.csv", grid)
            for name in ("true_pattern", "cs_sampled", "cs_detected", "cs_reported",
                         "aux_pattern", "ps_pattern")}
    omega1 = io.read_raster_csv(d / "omega1.csv", grid).values
    omega2 = io.read_raster_csv(d / "omega2.csv", grid).values
    return ScenarioReplicate(m["scenario"], m["replicate"], m["seed"], omega1, omega2,
                             pats["true_pattern"], pats["cs_sampled"], pats["cs_detected"],
                             pats["cs_reported"], pats["aux_pattern"],
                             np.array(m["selected"], dtype=bool), np.array(m["selection_probs"]),
                             tuple(m["unit_ids"]), pats["ps_pattern"], np.array(m["kappa"]), m["truth"])


def with_overrides(spec: ScenarioSpec, **kw) -> ScenarioSpec:
    return replace(spec, **kw)
