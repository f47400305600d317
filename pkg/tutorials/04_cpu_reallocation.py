"""Hand the idle cpu of each server to the microservices it hosts.

The proportional rule scales every request by capacity / total demand.  The
optimal rule minimizes the summed time ratio exactly and gives more to small
requests.
"""

import numpy as np

from layerchain import Deployment, ensure_augmented, generate_instance, preset
from layerchain import initial_feasible, kkt_residual, processing_time, reallocate
from layerchain.reallocation import reallocate_deployment

demands = [0.4, 0.6, 1.2, 0.8, 0.4, 0.7, 0.9]   # GHz, on a 7.2 GHz server
prop = reallocate(7.2, demands)
best = reallocate(7.2, demands, rule="optimal")
print(" u     proportional  optimal")
for u, a, b in zip(demands, prop.f, best.f):
    print(f"{u:.1f}   {a:10.3f}  {b:8.3f}")
print("sum e: before %.2f, proportional %.3f, optimal %.3f"
      % (prop.total_u_before, prop.total_u_after, best.total_u_after))
print("stationarity residual: proportional %.3f, optimal %.1e"
      % (kkt_residual(prop)["stationarity"], kkt_residual(best)["stationarity"]))

# a task that takes 16.84 s at its requested 0.4 GHz
work = 16.84 * 0.4
print("time at 0.4 GHz %.2f s, at %.3f GHz %.2f s" % (processing_time(work, 0.4), prop.f[0],
                                                   processing_time(work, prop.f[0])))

# per server over a whole deployment
inst = ensure_augmented(generate_instance(preset("testbed", seed=1)))
dep = Deployment.from_assignment(inst, initial_feasible(inst)[0])
for server, res in reallocate_deployment(inst, dep).items():
    if len(res):
        print(f"server {server}: {len(res)} microservices, capacity {res.capacity:.1f} GHz, "
              f"mean e {np.mean(res.e):.3f}")
