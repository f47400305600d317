"""Build a small instance by hand and look at the two costs.

Two edge servers on one link, three layers, one application with a
three-step chain.  Moving microservices around trades pulled bytes against
hops of traffic.
"""

import numpy as np

from layerchain import (
    Application, Deployment, Instance, Layer, Microservice, Server,
    build_hop_matrix, communication_overhead, ensure_augmented, pull_delay,
)

servers = [Server(0, cpu=6.4, storage=8192.0, cloud_bw=120.0),
           Server(1, cpu=6.4, storage=8192.0, cloud_bw=180.0)]
layers = [Layer(0, 800.0), Layer(1, 300.0), Layer(2, 150.0)]   # MB

# the base layer 0 is shared by all three images
mss = (Microservice(0, 1, 0.6, frozenset({0, 1})),
       Microservice(0, 2, 0.4, frozenset({0})),
       Microservice(0, 3, 0.8, frozenset({0, 2})))
traffic = np.zeros((3, 3))
traffic[0, 1], traffic[1, 2] = 900.0, 400.0                   # KB
app = Application(0, mss, traffic, source_server=0, ingress=200.0)

adj = np.array([[0, 1], [1, 0]])
inst = ensure_augmented(Instance(servers, layers, [app], build_hop_matrix(adj), adjacency=adj))
print("microservices (virtual source first):", inst.keys)

# everything at home: one copy of each layer, no hops
home = Deployment.from_assignment(inst, [0, 0, 0, 0])
print("all on 0  T = %.3f s  R = %.0f hop*KB" % (pull_delay(inst, home.pulls),
                                                 communication_overhead(inst, home.placements)))

# split the chain: layer 0 is pulled twice and the 900 KB edge crosses a hop
split = Deployment.from_assignment(inst, [0, 0, 1, 1])
print("split     T = %.3f s  R = %.0f hop*KB" % (pull_delay(inst, split.pulls),
                                                 communication_overhead(inst, split.placements)))

# everything on the faster link: cheaper pulls, but the ingress pays one hop
fast = Deployment.from_assignment(inst, [0, 1, 1, 1])
print("all on 1  T = %.3f s  R = %.0f hop*KB" % (pull_delay(inst, fast.pulls),
                                                 communication_overhead(inst, fast.placements)))

# a single image pulled alone: bytes over bandwidth
print("1617.48 MB at 120 MB/s takes %.3f s" % (1617.48 / 120.0))
