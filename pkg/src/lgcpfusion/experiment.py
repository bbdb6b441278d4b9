"""Simulation study: scenarios x replicates x models, with bias/RMSE tables.

Run directory layout::

    config.json                       echo of the configuration
    manifest.json                     status of every (scenario, replicate, model)
    results/s{S}_r{R}_m{M}.json       posterior means, diagnostics, risk rasters
    fits/s{S}_r{R}_m{M}/              stored chains (when ``save_chains``)
    tables/metrics.csv, metrics.txt   bias / RMSE / MCSE per parameter
    tables/prediction.csv             mean interval width and prediction RMSE
    maps/s{S}_m{M}_{rmse,width}.csv   per-cell prediction maps (+ heatmaps)
    run.log

Random streams: replicate ``r`` of every scenario uses data streams keyed by
``(master_seed, 0, r, stage)``, so scenarios share common random numbers.  The
fit of model ``m`` to scenario ``s``, replicate ``r`` uses the stream keyed by
``(master_seed, 1, s, r, m)`` with the chain index appended.
"""
from __future__ import annotations

import csv
import io as _io
import json
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .inference.data import fit_data_from_replicate
from .inference.models import ModelSpec, PCPrior, PriorSpec
from .inference.posterior import Posterior
from .inference.predict import risk, risk_draws
from .inference.sampler import FitResult, SamplerConfig, fit
from .landscape import Landscape, load_landscape
from .observation import SCENARIOS, ScenarioSpec, simulate_replicate

log = logging.getLogger("lgcpfusion.experiment")

COMPLEX_MODELS = (7, 8)
METRIC_FIELDS = ("scenario", "model", "parameter", "truth", "mean_estimate", "bias", "rmse", "mcse",
                 "n_used", "n_failed", "n_configured")
PREDICTION_FIELDS = ("scenario", "model", "mean_width", "mean_prediction_rmse", "n_used",
                     "n_converged", "n_failed")


@dataclass
class ExperimentConfig:
    """Settings of one simulation study.  Serialised as JSON.

    ``complex_models_everywhere`` fits models 7 and 8 in scenarios 1 and 2
    too; by default they only run where willingness to report is low.
    ``prediction_cell_area`` is the cell area used for the risk maps.
    """

    scenarios: list = field(default_factory=lambda: [1, 2, 3, 4])
    n_replicates: int = 20
    models: list = field(default_factory=lambda: list(range(1, 9)))
    complex_models_everywhere: bool = False
    landscape: dict = field(default_factory=lambda: {"kind": "synthetic"})
    scenario_overrides: dict = field(default_factory=dict)
    model_overrides: dict = field(default_factory=dict)
    priors: dict = field(default_factory=dict)
    sampler: dict = field(default_factory=lambda: {"iterations": 3000, "warmup": 1000, "thin": 2,
                                                   "chains": 2, "store_fields": False})
    prediction_cell_area: float = 1.0
    save_chains: bool = False
    heatmaps: bool = True
    output_dir: str = "run"
    master_seed: int = 1
    threads: int = 1

    def __post_init__(self):
        bad = [s for s in self.scenarios if s not in SCENARIOS]
        if bad:
            raise ValueError(f"unknown scenarios {bad}; choose from {sorted(SCENARIOS)}")
        bad = [m for m in self.models if m not in range(1, 9)]
        if bad:
            raise ValueError(f"unknown models {bad}; choose from 1..8")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if not self.prediction_cell_area > 0:
            raise ValueError("prediction_cell_area must be positive")
        self.scenarios = [int(s) for s in self.scenarios]
        self.models = [int(m) for m in self.models]
        SamplerConfig(**self.sampler)

    # -- derived ---------------------------------------------------------------

    def models_for(self, scenario: int) -> list[int]:
        if self.complex_models_everywhere or SCENARIOS[scenario][0] == "low":
            return list(self.models)
        return [m for m in self.models if m not in COMPLEX_MODELS]

    def triples(self) -> list[tuple[int, int, int]]:
        return [(s, r, m) for s in self.scenarios for r in range(self.n_replicates)
                for m in self.models_for(s)]

    def scenario_spec(self, scenario: int) -> ScenarioSpec:
        over = {k: tuple(v) if isinstance(v, list) else v for k, v in self.scenario_overrides.items()}
        return ScenarioSpec.for_scenario(scenario, n_replicates=self.n_replicates,
                                         seed=self.master_seed, **over)

    def model_spec(self, model_id: int) -> ModelSpec:
        over = {k: tuple(v) if isinstance(v, list) else v for k, v in self.model_overrides.items()}
        return ModelSpec.from_id(model_id, **over)

    def prior_spec(self, landscape: Landscape) -> PriorSpec:
        p = dict(self.priors)
        pc_keys = ("alpha_rho", "sigma0", "alpha_sigma")
        pc_kw = {k: p.pop(k) for k in pc_keys if k in p}
        rho_fraction = p.pop("rho0_fraction", 0.1)
        pc = PCPrior(rho_fraction * landscape.grid.diameter(), **pc_kw)
        if "nu_center" in p:
            p["nu_center"] = tuple(p["nu_center"])
        return PriorSpec(pc, pc, **p)

    def sampler_config(self) -> SamplerConfig:
        kw = dict(self.sampler)
        if "precond_refresh" in kw:
            kw["precond_refresh"] = tuple(kw["precond_refresh"])
        return SamplerConfig(**kw)

    # -- serialisation ---------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys {unknown}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        cfg = cls.from_dict(json.loads(path.read_text()))
        land = dict(cfg.landscape)
        if land.get("kind") == "files":
            land.setdefault("base", str(path.parent))
            cfg.landscape = land
        return cfg

    def build_landscape(self) -> Landscape:
        spec = dict(self.landscape)
        base = spec.pop("base", ".")
        return load_landscape(spec, base)


# ---------------------------------------------------------------------------
# one fit


def triple_key(scenario: int, replicate: int, model: int) -> str:
    return f"s{scenario}_r{replicate}_m{model}"


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def summarize_fit(fit_result: FitResult, truth: dict) -> dict:
    """Posterior means of all scalar parameters (the default summary)."""
    return fit_result.posterior_means()


def fit_triple(config: ExperimentConfig, landscape: Landscape, replicate, model_id: int,
               summarize=summarize_fit) -> tuple[dict, FitResult]:
    """Fit one model to one replicate and compute its risk summaries."""
    model = config.model_spec(model_id)
    data = fit_data_from_replicate(landscape, model, replicate)
    post = Posterior(model, data, config.prior_spec(landscape))
    seed = (config.master_seed, 1, replicate.scenario, replicate.replicate, model_id)
    res = fit(post, config.sampler_config(), seed=seed)
    means = summarize(res, replicate.truth)
    X = landscape.design(model.x_covariates)
    area = config.prediction_cell_area
    draws = risk_draws(res, X, "fixed_effects_only", area)
    lo, med, hi = np.quantile(draws, [0.025, 0.5, 0.975], axis=0)
    spec = config.scenario_spec(replicate.scenario)
    true_risk = risk(landscape.design(spec.x_covariates) @ np.asarray(spec.beta), area)
    rec = {
        "scenario": replicate.scenario, "replicate": replicate.replicate, "model": model_id,
        "status": "ok",
        "posterior_means": {k: float(v) for k, v in means.items()},
        "truth": {k: float(v) for k, v in replicate.truth.items()},
        "rhat": {k: float(v) for k, v in res.diagnostics["rhat"].items()},
        "ess": {k: float(v) for k, v in res.diagnostics["ess"].items()},
        "acceptance": {k: _floats(v) for k, v in res.diagnostics["acceptance"].items()},
        "converged": res.converged("beta[1]"),
        "risk_median": _floats(med),
        "risk_width": _floats(hi - lo),
        "true_risk": _floats(true_risk),
        "counts": {"ps": len(replicate.ps_pattern), "cs": len(replicate.cs_reported),
                   "aux": len(replicate.aux_pattern), "units": int(np.sum(replicate.selected))},
    }
    return rec, res


# ---------------------------------------------------------------------------
# runner


class _ReplicateCache:
    """Simulated replicates, regenerated on demand (they are deterministic)."""

    def __init__(self, config: ExperimentConfig, landscape: Landscape):
        self.config, self.landscape = config, landscape
        self._key, self._rep = None, None

    def get(self, scenario: int, replicate: int):
        if self._key != (scenario, replicate):
            spec = self.config.scenario_spec(scenario)
            self._rep = simulate_replicate(spec, self.landscape, replicate, self.config.master_seed)
            self._key = (scenario, replicate)
        return self._rep


_WORKER = {}


def _worker_init(config_dict, summarize):
    cfg = ExperimentConfig.from_dict(config_dict)
    land = cfg.build_landscape()
    _WORKER.update(config=cfg, landscape=land, cache=_ReplicateCache(cfg, land), summarize=summarize)


def _run_triple(triple, config=None, landscape=None, cache=None, summarize=summarize_fit):
    s, r, m = triple
    if config is None:
        config, landscape, cache = _WORKER["config"], _WORKER["landscape"], _WORKER["cache"]
        summarize = _WORKER["summarize"]
    try:
        rep = cache.get(s, r)
        rec, res = fit_triple(config, landscape, rep, m, summarize)
        if config.save_chains:
            res.save(Path(config.output_dir) / "fits" / triple_key(s, r, m))
        return rec
    except Exception as exc:  # a failed fit is recorded, never fatal
        return {"scenario": s, "replicate": r, "model": m, "status": "failed",
                "error": f"{type(exc).__name__}: {exc}", "traceback": traceback.format_exc()}


def _load_manifest(path: Path) -> dict:
    if path.exists():
        return json.loads(path.read_text())
    return {"completed": {}}


def run_experiment(config: ExperimentConfig, resume: bool = False, summarize=summarize_fit,
                   progress=None) -> "MetricsTable":
    """Run (or resume) the study and write every table and map.

    ``summarize(fit, truth) -> {name: estimate}`` replaces the posterior means;
    tests use it to substitute the true values.
    """
    out = Path(config.output_dir)
    (out / "results").mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    handler.setLevel(logging.INFO)
    log.addHandler(handler)
    old_level = log.level
    log.setLevel(logging.INFO)
    try:
        manifest_path = out / "manifest.json"
        manifest = _load_manifest(manifest_path) if resume else {"completed": {}}
        if resume and manifest.get("config") not in (None, config.to_dict()):
            log.warning("resuming with a configuration that differs from the manifest")
        manifest["config"] = config.to_dict()
        (out / "config.json").write_text(config.to_json() + "\n")
        todo = [t for t in config.triples()
                if not (triple_key(*t) in manifest["completed"]
                        and (out / "results" / f"{triple_key(*t)}.json").exists())]
        log.info("%d of %d fits to run", len(todo), len(config.triples()))

        def record(rec):
            key = triple_key(rec["scenario"], rec["replicate"], rec["model"])
            _write_atomic(out / "results" / f"{key}.json", json.dumps(rec, sort_keys=True))
            manifest["completed"][key] = rec["status"]
            _write_atomic(manifest_path, json.dumps(manifest, indent=1, sort_keys=True))
            if rec["status"] != "ok":
                log.error("fit %s failed: %s", key, rec["error"])
            else:
                log.info("fit %s done", key)
            if progress is not None:
                progress(rec)

        if config.threads > 1 and len(todo) > 1:
            with ProcessPoolExecutor(config.threads, initializer=_worker_init,
                                     initargs=(config.to_dict(), summarize)) as pool:
                for rec in pool.map(_run_triple, todo):
                    record(rec)
        else:
            landscape = config.build_landscape()
            cache = _ReplicateCache(config, landscape)
            for t in todo:
                record(_run_triple(t, config, landscape, cache, summarize))
        return write_report(out)
    finally:
        log.setLevel(old_level)
        log.removeHandler(handler)
        handler.close()


# ---------------------------------------------------------------------------
# aggregation


def load_results(run_dir) -> list[dict]:
    """All per-fit records of a run, in (scenario, model, replicate) order."""
    recs = [json.loads(p.read_text()) for p in Path(run_dir, "results").glob("*.json")]
    return sorted(recs, key=lambda r: (r["scenario"], r["model"], r["replicate"]))


def _param_order(name: str):
    base, _, idx = name.partition("[")
    return (base, int(idx.rstrip("]")) if idx else -1)


@dataclass
class MetricsTable:
    """Bias, RMSE and Monte Carlo standard error of the posterior means."""

    rows: list

    def to_csv(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for r in self.rows:
            w.writerow([repr(r[k]) if isinstance(r[k], float) else r[k] for k in METRIC_FIELDS])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"{'scen':>4} {'model':>5} {'parameter':<12}{'truth':>9}{'bias':>10}{'rmse':>10}"
                 f"{'mcse':>9}{'used':>6}{'fail':>6}"]
        for r in self.rows:
            lines.append(f"{r['scenario']:>4} {r['model']:>5} {r['parameter']:<12}{r['truth']:>9.3f}"
                         f"{r['bias']:>10.4f}{r['rmse']:>10.4f}{r['mcse']:>9.4f}"
                         f"{r['n_used']:>6}{r['n_failed']:>6}")
        return "\n".join(lines) + "\n"

    def get(self, scenario: int, model: int, parameter: str) -> dict:
        for r in self.rows:
            if (r["scenario"], r["model"], r["parameter"]) == (scenario, model, parameter):
                return r
        raise KeyError((scenario, model, parameter))

    @classmethod
    def from_csv(cls, text: str) -> "MetricsTable":
        rows = []
        for r in csv.DictReader(_io.StringIO(text)):
            row = {}
            for k in METRIC_FIELDS:
                v = r[k]
                if k in ("scenario", "model", "n_used", "n_failed", "n_configured"):
                    row[k] = int(v)
                elif k == "parameter":
                    row[k] = v
                else:
                    row[k] = float(v)
            rows.append(row)
        return cls(rows)


def compute_metrics(records: list[dict], n_configured: int | None = None) -> MetricsTable:
    """Aggregate per-fit records into a :class:`MetricsTable`.

    Parameters are those with both a posterior mean and a true value.  Failed
    fits are excluded from the statistics and counted in ``n_failed``.
    """
    groups: dict = {}
    for r in records:
        groups.setdefault((r["scenario"], r["model"]), []).append(r)
    rows = []
    for (s, m), recs in sorted(groups.items()):
        ok = [r for r in recs if r["status"] == "ok"]
        n_failed = len(recs) - len(ok)
        if not ok:
            continue
        names = sorted(set(ok[0]["posterior_means"]) & set(ok[0]["truth"]), key=_param_order)
        for name in names:
            est = np.array([r["posterior_means"][name] for r in ok])
            tru = np.array([r["truth"][name] for r in ok])
            err = est - tru
            n = err.size
            rows.append({
                "scenario": s, "model": m, "parameter": name,
                "truth": float(tru.mean()), "mean_estimate": float(est.mean()),
                "bias": float(err.mean()), "rmse": float(np.sqrt(np.mean(err ** 2))),
                "mcse": float(err.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan"),
                "n_used": n, "n_failed": n_failed,
                "n_configured": len(recs) if n_configured is None else n_configured,
            })
    return MetricsTable(rows)


def prediction_summary(records: list[dict]) -> tuple[list[dict], dict]:
    """Per (scenario, model): mean interval width, prediction RMSE, per-cell maps."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r["scenario"], r["model"]), []).append(r)
    rows, maps = [], {}
    for (s, m), recs in sorted(groups.items()):
        ok = [r for r in recs if r["status"] == "ok"]
        if not ok:
            continue
        med = np.array([r["risk_median"] for r in ok])
        tru = np.array([r["true_risk"] for r in ok])
        width = np.array([r["risk_width"] for r in ok])
        rmse_map = np.sqrt(np.mean((med - tru) ** 2, axis=0))
        width_map = width.mean(axis=0)
        maps[(s, m)] = {"rmse": rmse_map, "width": width_map}
        rows.append({"scenario": s, "model": m, "mean_width": float(width_map.mean()),
                     "mean_prediction_rmse": float(rmse_map.mean()), "n_used": len(ok),
                     "n_converged": int(sum(bool(r["converged"]) for r in ok)),
                     "n_failed": len(recs) - len(ok)})
    return rows, maps


def write_report(run_dir, heatmaps: bool | None = None) -> MetricsTable:
    """(Re)write tables and maps of a run from its per-fit records."""
    from .plotting import render_heatmap

    run_dir = Path(run_dir)
    config = ExperimentConfig.from_dict(json.loads((run_dir / "config.json").read_text()))
    records = load_results(run_dir)
    table = compute_metrics(records, config.n_replicates)
    tables = run_dir / "tables"
    tables.mkdir(exist_ok=True)
    (tables / "metrics.csv").write_text(table.to_csv())
    (tables / "metrics.txt").write_text(table.to_text())
    rows, maps = prediction_summary(records)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PREDICTION_FIELDS)
    for r in rows:
        w.writerow([repr(r[k]) if isinstance(r[k], float) else r[k] for k in PREDICTION_FIELDS])
    (tables / "prediction.csv").write_text(buf.getvalue())
    failures = [r for r in records if r["status"] != "ok"]
    (tables / "failures.txt").write_text("".join(
        f"{triple_key(r['scenario'], r['replicate'], r['model'])}: {r['error']}\n" for r in failures))
    if maps:
        grid = config.build_landscape().grid
        mdir = run_dir / "maps"
        mdir.mkdir(exist_ok=True)
        draw = config.heatmaps if heatmaps is None else heatmaps
        for (s, m), mp in maps.items():
            for kind, values in mp.items():
                io.write_raster_csv(mdir / f"s{s}_m{m}_{kind}.csv", grid, values)
                if draw:
                    label = "prediction RMSE" if kind == "rmse" else "mean 95% interval width"
                    render_heatmap(values, grid, mdir / f"s{s}_m{m}_{kind}.svg",
                                   title=f"scenario {s}, model {m}: {label}")
    return table
