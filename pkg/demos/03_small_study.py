"""A miniature simulation study: bias and RMSE of the posterior means.

Runs three replicates of the two high-willingness scenarios through models
1, 2 and 6 and prints the metrics table that ``lgcpfusion experiment`` would
write.  Scale ``n_replicates`` up (and add scenarios 3 and 4) for the full
desk-scale study.

    python3 demos/03_small_study.py [run_dir]
"""
import sys

from lgcpfusion.experiment import ExperimentConfig, run_experiment

cfg = ExperimentConfig(scenarios=[1, 2], n_replicates=3, models=[1, 2, 6],
                       output_dir=sys.argv[1] if len(sys.argv) > 1 else "demo_out/03")
table = run_experiment(cfg, resume=True)
print(table.to_text(), end="")
print(f"tables and maps in {cfg.output_dir}")
