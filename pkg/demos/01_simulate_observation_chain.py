"""Simulate one replicate of the preferential, low-willingness scenario and map each stage.

The true carcass pattern is thinned three times on the citizen-science side
(sampling effort, detectability, reporting) and restricted to the selected
survey units on the professional side.  Every stage is rendered as a count
heatmap so the losses can be compared by eye.

    python3 demos/01_simulate_observation_chain.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np

from lgcpfusion.landscape import desk_landscape
from lgcpfusion.observation import ScenarioSpec, simulate_replicate
from lgcpfusion.plotting import render_heatmap

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/01")
out.mkdir(parents=True, exist_ok=True)

land = desk_landscape()
grid = land.grid
rep = simulate_replicate(ScenarioSpec.for_scenario(4), land, replicate=0, master_seed=1)

stages = {
    "true": rep.true_pattern,
    "cs_sampled": rep.cs_sampled,
    "cs_detected": rep.cs_detected,
    "cs_reported": rep.cs_reported,
    "survey": rep.ps_pattern,
}
for name, pattern in stages.items():
    print(f"{name:<12} {len(pattern):>6} points")
    render_heatmap(pattern.counts(grid), grid, out / f"{name}.svg", palette="magma", title=f"{name} counts")

render_heatmap(rep.omega1, grid, out / "omega1.svg", palette="RdBu_r", title="ecological field")
print(f"selected units: {int(rep.selected.sum())} of {rep.selected.size} "
      f"(probabilities {np.round(rep.selection_probs, 2)})")
print(f"observer reporting propensities: {np.round(rep.kappa, 2)}")
print(f"true values: {rep.truth}")
print(f"maps written to {out}")
