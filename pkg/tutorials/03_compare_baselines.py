"""Compare the solver with the greedy and pinned strategies.

Lower F is better.  lds and cds are the solver with theta pinned to 1 and 0,
scored here at theta = 0.5 like everything else.
"""

import numpy as np

from layerchain import METHODS, ensure_augmented, evaluate, generate_instance
from layerchain import normalization_bounds, preset, solve_with
from layerchain.experiment import baseline_metrics

rows = {m: [] for m in METHODS}
for seed in range(8):
    inst = ensure_augmented(generate_instance(preset("table3", seed=seed, n_apps=(3, 5), n_servers=(4, 6))))
    cfg = normalization_bounds(inst, 0.5)
    base_t, base_r = baseline_metrics(inst)
    for m in METHODS:
        dep, _ = solve_with(m, inst, 0.5)
        F, T, R = evaluate(inst, dep, cfg)
        rows[m].append((F, T / base_t, R / base_r))

print(f"{'method':>6} {'mean F':>8} {'T ratio':>8} {'R ratio':>8}")
for m in METHODS:
    F, t, r = np.mean(rows[m], axis=0)
    print(f"{m:>6} {F:8.4f} {t:8.3f} {r:8.3f}")
