"""Fit a survey-only, a citizen-science-only and a fusion model to one replicate.

The replicate comes from the preferential, high-willingness scenario, where
a survey-only fit ignores how units were selected.  The script prints each
model's posterior summary next to the true effects and maps the
fixed-effects-only risk of the fusion model.

    python3 demos/02_fit_and_compare_models.py [out_dir]
"""
import sys
from pathlib import Path

from lgcpfusion.inference import ModelSpec, Posterior, SamplerConfig, fit
from lgcpfusion.inference.data import fit_data_from_replicate
from lgcpfusion.inference.models import PCPrior, PriorSpec
from lgcpfusion.inference.predict import predict_risk
from lgcpfusion.landscape import desk_landscape
from lgcpfusion.observation import ScenarioSpec, simulate_replicate
from lgcpfusion.plotting import render_heatmap

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/02")
out.mkdir(parents=True, exist_ok=True)

land = desk_landscape()
rep = simulate_replicate(ScenarioSpec.for_scenario(2), land, replicate=0, master_seed=1)
pc = PCPrior(0.1 * land.grid.diameter())
priors = PriorSpec(pc, pc)
sampler = SamplerConfig(warmup=1000, iterations=3000, thin=2, chains=2)

print("truth:", {k: round(v, 3) for k, v in rep.truth.items()})
for model_id in (1, 5, 6):
    model = ModelSpec.from_id(model_id)
    post = Posterior(model, fit_data_from_replicate(land, model, rep), priors)
    res = fit(post, sampler, seed=(1, 1, 2, 0, model_id))
    print(f"\n{model.describe()}")
    print(res.summary())
    pred = predict_risk(res, model, land.covariates, land.grid, cell_area=1.0)
    print(f"mean 95% width of fixed-effects risk: {pred.mean_width:.4f}")
    render_heatmap(pred.median, land.grid, out / f"m{model_id}_risk_median.svg", palette="magma",
                   title=f"model {model_id} risk median")
    render_heatmap(pred.width, land.grid, out / f"m{model_id}_risk_width.svg",
                   title=f"model {model_id} 95% width")
print(f"\nmaps written to {out}")
