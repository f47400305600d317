"""Generate a scenario and solve it with successive convex approximation.

Each iteration minimizes a convex upper bound of the scalarized cost around
the current placement.  The trace shows the cost after every step.
"""

from layerchain import ScaConfig, check_feasibility, ensure_augmented, evaluate
from layerchain import generate_instance, normalization_bounds, preset, sca_solve

inst = ensure_augmented(generate_instance(preset("table3", seed=3)))
print(f"{inst.n_servers} servers, {len(inst.apps)} apps, {inst.n_ms} microservices incl. virtual sources")

for theta in (0.0, 0.5, 1.0):
    dep, trace = sca_solve(inst, ScaConfig(theta=theta))
    F, T, R = evaluate(inst, dep, normalization_bounds(inst, theta))
    print(f"theta={theta:.1f}  start={trace.start:<10} iterations={trace.iterations} "
          f"U={['%.4f' % u for u in trace.U]}  T={T:.1f}s R={R:.0f}hopKB "
          f"feasible={check_feasibility(inst, dep).feasible}")

# the first-fit start alone, to see how far the loop moves from it
dep, trace = sca_solve(inst, ScaConfig(warm_start="ffd"))
print("ffd start:", ["%.4f" % u for u in trace.U], "subproblem nodes:",
      [s.nodes_expanded for s in trace.subproblem_stats])

# a relaxed step keeps fractional iterates and rounds with a final exact solve
dep, trace = sca_solve(inst, ScaConfig(alpha=0.5, max_iters=10))
print("alpha=0.5:", ["%.4f" % u for u in trace.U])
