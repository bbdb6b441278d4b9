import json

import numpy as np
import pytest

from lgcpfusion import experiment as ex
from lgcpfusion.experiment import ExperimentConfig, MetricsTable, compute_metrics, load_results, run_experiment
from lgcpfusion.inference import FitResult

TINY_SAMPLER = {"iterations": 120, "warmup": 40, "thin": 2, "chains": 2, "store_fields": False}
SMALL_LAND = {"kind": "synthetic", "nx": 10}


def tiny_config(tmp_path, **kw):
    base = dict(scenarios=[3], n_replicates=1, models=[3], landscape=SMALL_LAND, sampler=TINY_SAMPLER,
                output_dir=str(tmp_path / "run"), heatmaps=False)
    base.update(kw)
    return ExperimentConfig(**base)


def test_smoke_run(tmp_path):
    cfg = tiny_config(tmp_path)
    table = run_experiment(cfg)
    run = tmp_path / "run"
    for f in ("config.json", "manifest.json", "run.log", "tables/metrics.csv", "tables/metrics.txt",
              "tables/prediction.csv", "tables/failures.txt", "maps/s3_m3_rmse.csv", "maps/s3_m3_width.csv"):
        assert (run / f).is_file(), f
    assert json.loads((run / "manifest.json").read_text())["completed"] == {"s3_r0_m3": "ok"}
    rows = [r for r in table.rows if r["parameter"] == "beta[1]"]
    assert len(rows) == 1 and np.isfinite(rows[0]["bias"]) and np.isfinite(rows[0]["rmse"])
    assert all(r["rmse"] >= abs(r["bias"]) - 1e-15 for r in table.rows)
    assert "fit s3_r0_m3 done" in (run / "run.log").read_text()
    text = (run / "tables" / "metrics.csv").read_text()
    assert MetricsTable.from_csv(text).to_csv() == text == table.to_csv()


def test_truth_substitution_gives_zero_error(tmp_path):
    cfg = tiny_config(tmp_path, n_replicates=2, models=[1, 5])

    def truth_hook(fit, truth):
        return {k: truth[k] for k in fit.posterior_means() if k in truth}

    table = run_experiment(cfg, summarize=truth_hook)
    assert table.rows
    for r in table.rows:
        assert r["bias"] == 0.0 and r["rmse"] == 0.0


def test_metrics_match_recomputation_from_stored_chains(tmp_path):
    cfg = tiny_config(tmp_path, n_replicates=2, models=[1, 4], save_chains=True)
    run_experiment(cfg)
    run = tmp_path / "run"
    table = MetricsTable.from_csv((run / "tables" / "metrics.csv").read_text())
    from lgcpfusion.landscape import desk_landscape
    from lgcpfusion.observation import ScenarioSpec, simulate_replicate
    land = desk_landscape(nx=10)
    for m in (1, 4):
        fits = [FitResult.load(run / "fits" / f"s3_r{r}_m{m}") for r in range(2)]
        truths = [simulate_replicate(ScenarioSpec.for_scenario(3), land, r, 1).truth for r in range(2)]
        for name in ("beta[0]", "beta[1]", "rho1", "sigma1"):
            err = np.array([f.chains[name].mean() - t[name] for f, t in zip(fits, truths)])
            row = table.get(3, m, name)
            assert abs(row["bias"] - err.mean()) <= 1e-12
            assert abs(row["rmse"] - np.sqrt(np.mean(err ** 2))) <= 1e-12


def test_resume_skips_completed_fits(tmp_path, monkeypatch):
    cfg = tiny_config(tmp_path, n_replicates=2, models=[1, 3])

    class Stop(Exception):
        pass

    seen = []

    def interrupt(rec):
        seen.append(rec)
        if len(seen) == 2:
            raise Stop

    with pytest.raises(Stop):
        run_experiment(cfg, progress=interrupt)
    run = tmp_path / "run"
    done = json.loads((run / "manifest.json").read_text())["completed"]
    assert len(done) == 2
    before = {k: (run / "results" / f"{k}.json").read_bytes() for k in done}

    refit = []
    real = ex.fit_triple
    monkeypatch.setattr(ex, "fit_triple", lambda *a, **k: refit.append(a[2].replicate) or real(*a, **k))
    run_experiment(cfg, resume=True)
    after = json.loads((run / "manifest.json").read_text())["completed"]
    assert len(after) == 4 and len(refit) == 2
    for k, v in before.items():
        assert (run / "results" / f"{k}.json").read_bytes() == v
        assert after[k] == done[k]


def test_failed_fits_are_excluded_and_counted(tmp_path, monkeypatch):
    cfg = tiny_config(tmp_path, n_replicates=3, models=[3])
    real = ex.fit_triple

    def flaky(config, landscape, replicate, model_id, summarize):
        if replicate.replicate == 1:
            raise FloatingPointError("synthetic failure")
        return real(config, landscape, replicate, model_id, summarize)

    monkeypatch.setattr(ex, "fit_triple", flaky)
    table = run_experiment(cfg)
    for r in table.rows:
        assert r["n_used"] == 2 and r["n_failed"] == 1
        assert r["n_used"] + r["n_failed"] == r["n_configured"] == 3
    run = tmp_path / "run"
    assert "s3_r1_m3: FloatingPointError: synthetic failure" in (run / "tables" / "failures.txt").read_text()
    assert "synthetic failure" in (run / "run.log").read_text()
    pred = (run / "tables" / "prediction.csv").read_text().splitlines()
    assert pred[1].split(",")[-1] == "1"


def test_metrics_identities():
    recs = [{"scenario": 1, "model": 1, "status": "ok", "posterior_means": {"a": a, "b": 0.0},
             "truth": {"a": 1.0, "c": 2.0}} for a in (0.5, 1.5, 2.5)]
    recs.append({"scenario": 1, "model": 1, "status": "failed", "error": "x"})
    t = compute_metrics(recs, 4)
    assert [r["parameter"] for r in t.rows] == ["a"]
    r = t.rows[0]
    assert r["bias"] == pytest.approx(0.5)
    assert r["rmse"] == pytest.approx(np.sqrt((0.25 + 0.25 + 2.25) / 3))
    assert r["mcse"] == pytest.approx(1.0 / np.sqrt(3))
    assert (r["n_used"], r["n_failed"], r["n_configured"]) == (3, 1, 4)


def test_config_round_trip_and_validation(tmp_path):
    cfg = ExperimentConfig(scenarios=[2, 4], models=[1, 7, 8], priors={"rho0_fraction": 0.2})
    back = ExperimentConfig.from_dict(json.loads(cfg.to_json()))
    assert back == cfg
    assert cfg.models_for(2) == [1] and cfg.models_for(4) == [1, 7, 8]
    assert ExperimentConfig(models=[7], complex_models_everywhere=True).models_for(1) == [7]
    land = ExperimentConfig(landscape=SMALL_LAND).build_landscape()
    assert cfg.prior_spec(land).field1.rho0 == pytest.approx(0.2 * land.grid.diameter())
    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_dict({"replicates": 3})
    with pytest.raises(ValueError):
        ExperimentConfig(scenarios=[5])
    with pytest.raises(ValueError):
        ExperimentConfig(models=[0])
    with pytest.raises(ValueError):
        ExperimentConfig(sampler={"iterations": 10, "warmup": 20})
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"landscape": {"kind": "files", "grid": "grid.asc"}}))
    assert ExperimentConfig.load(p).landscape["base"] == str(tmp_path)


def test_default_scale():
    cfg = ExperimentConfig()
    assert cfg.scenarios == [1, 2, 3, 4] and cfg.n_replicates == 20
    assert len(cfg.triples()) == 20 * (6 + 6 + 8 + 8)
    land = cfg.build_landscape()
    assert (land.grid.nx, land.grid.ny) == (40, 40)
    assert len(land.units) == 8
