"""Run a small grid of instances, methods and weights and write the report.

The same grid can be run from the shell with ``layerchain compare``.
"""

import json
import sys
import tempfile
from pathlib import Path

from layerchain import ExperimentConfig, run_experiment

config = ExperimentConfig.from_dict({
    "instances": [{"preset": "table3", "seeds": [0, 1, 2], "generator": {"n_servers": [4, 6]}}],
    "methods": ["sca", "gds", "k8s"],
    "thetas": [0.25, 0.5, 0.75],
    "sca": {"subproblem_budget": 2000},
})
report = run_experiment(config)

for row in report.summary():
    print(f"{row['method']:>4} theta={row['theta']:.2f}  F={row['F']:.4f}  "
          f"T ratio={row['T_ratio']:.3f}  R ratio={row['R_ratio']:.3f}")

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
report.write(out)
print("wrote", sorted(p.name for p in out.iterdir()), "to", out)
print(json.dumps(report.instances, indent=1))
