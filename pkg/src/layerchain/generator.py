"""Random scenario generation and topology presets.

Every quantity is drawn uniformly from its range.  Integer ranges are
inclusive.  Server cpu capacity is ``cores * frequency``, with the frequency
drawn from ``cpu_freq``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import GenerationFailed, InfeasibleInstance, NoFeasiblePoint
from .model import Application, Instance, Layer, Microservice, Server, build_hop_matrix

__all__ = [
    "GeneratorParams",
    "PRESETS",
    "preset",
    "generate_instance",
    "nsfnet_topology",
    "NSFNET_EDGES",
]

# The 14-node, 21-link NSFNET T1 backbone (0-based), plus node 14 dual-homed
# to nodes 4 and 7 to reach 15 servers.
NSFNET_EDGES = (
    (0, 1), (0, 2), (0, 7), (1, 2), (1, 3), (2, 5), (3, 4), (3, 10), (4, 5),
    (4, 6), (5, 9), (5, 13), (6, 7), (7, 8), (8, 9), (8, 11), (8, 12),
    (10, 11), (10, 12), (11, 13), (12, 13),
    (14, 4), (14, 7),
)


def nsfnet_topology() -> np.ndarray:
    adj = np.zeros((15, 15), dtype=np.int8)
    for a, b in NSFNET_EDGES:
        adj[a, b] = adj[b, a] = 1
    return adj


@dataclass(frozen=True)
class GeneratorParams:
    n_apps: tuple = (4, 9)
    n_servers: tuple = (4, 9)
    services_per_app: tuple = (2, 6)
    cpu_freq: tuple = (1.4, 2.2)  # GHz per core
    cpu_cores: int = 4
    storage: tuple = (4.0, 16.0)  # GB
    bandwidth: tuple = (120.0, 200.0)  # MB/s
    layer_size: tuple = (1.0, 1220.0)  # MB
    cpu_demand: tuple = (0.002, 1.0)  # GHz
    layers_per_image: tuple = (1, 2)
    traffic: tuple = (100.0, 2000.0)  # KB
    ingress: tuple = (100.0, 2000.0)  # KB, virtual source -> first microservice
    max_hops: int = 5
    layer_pool_ratio: float = 0.75  # distinct layers per microservice
    branch_prob: float = 0.5  # chance that a chain gets one fan-out edge
    extra_edge_prob: float = 0.25
    topology: str = "random"  # random | nsfnet
    total_services: int | None = None  # pins the microservice count when set
    seed: int = 0
    max_retries: int = 200

    def __post_init__(self):
        for f in ("n_apps", "n_servers", "services_per_app", "cpu_freq", "storage", "bandwidth",
                  "layer_size", "cpu_demand", "layers_per_image", "traffic", "ingress"):
            lo, hi = getattr(self, f)
            if lo > hi:
                raise ValueError(f"{f}: empty range {lo}..{hi}")
        if self.topology not in ("random", "nsfnet"):
            raise ValueError(f"unknown topology {self.topology!r}")

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown generator parameters: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


PRESETS = {
    "table3": GeneratorParams(),
    "nsfnet": GeneratorParams(
        n_servers=(15, 15), topology="nsfnet", storage=(16.0, 16.0), cpu_freq=(1.6, 1.6),
        bandwidth=(80.0, 120.0),
    ),
    # five-server testbed ranges; storage is left loose
    "testbed": GeneratorParams(
        n_apps=(5, 7), n_servers=(5, 5), cpu_freq=(1.8, 1.8), storage=(4.0, 8.0),
        layer_size=(1.24, 1098.0), cpu_demand=(0.2, 1.4),
    ),
    # enumerable scale for exactness checks
    "tiny": GeneratorParams(
        n_apps=(1, 2), n_servers=(2, 3), services_per_app=(1, 3), cpu_cores=1,
        storage=(1.0, 3.0), layer_size=(100.0, 1220.0), cpu_demand=(0.2, 1.0),
    ),
}


def preset(name, **overrides) -> GeneratorParams:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    unknown = set(overrides) - {f.name for f in fields(GeneratorParams)}
    if unknown:
        raise ValueError(f"unknown generator parameters: {sorted(unknown)}")
    return replace(base, **overrides)


def _uniform(rng, rng_range, digits):
    lo, hi = rng_range
    return round(float(rng.uniform(lo, hi)), digits)


def _int(rng, rng_range):
    lo, hi = rng_range
    return int(rng.integers(lo, hi + 1))


def _random_topology(rng, n, params):
    for _ in range(params.max_retries):
        adj = np.zeros((n, n), dtype=np.int8)
        perm = rng.permutation(n)
        for p in range(1, n):
            q = int(rng.integers(0, p))
            a, b = perm[p], perm[q]
            adj[a, b] = adj[b, a] = 1
        extra = np.triu(rng.random((n, n)) < params.extra_edge_prob, 1)
        adj |= (extra | extra.T).astype(np.int8)
        hops = build_hop_matrix(adj)
        if hops.max_hop <= params.max_hops:
            return adj, hops
    raise GenerationFailed(f"no {n}-node topology with diameter <= {params.max_hops}")


def _chain_traffic(rng, a, params):
    """Directed chain 1 -> 2 -> ... -> A with at most one fan-out edge."""
    w = np.zeros((a, a))
    parent = list(range(-1, a - 1))
    if a >= 3 and rng.random() < params.branch_prob:
        p = int(rng.integers(2, a))
        parent[p] = int(rng.integers(0, p - 1))
    for p in range(1, a):
        w[parent[p], p] = _uniform(rng, params.traffic, 1)
    return w


def _draw(rng, params):
    n = 15 if params.topology == "nsfnet" else _int(rng, params.n_servers)
    if params.topology == "nsfnet":
        adj = nsfnet_topology()
        hops = build_hop_matrix(adj)
    else:
        adj, hops = _random_topology(rng, n, params)

    servers = [
        Server(
            id=s,
            cpu=round(params.cpu_cores * _uniform(rng, params.cpu_freq, 3), 3),
            storage=round(_uniform(rng, params.storage, 4) * 1024.0, 1),
            cloud_bw=_uniform(rng, params.bandwidth, 1),
        )
        for s in range(n)
    ]

    if params.total_services is not None:
        sizes = _split_services(rng, params)
    else:
        sizes = [_int(rng, params.services_per_app) for _ in range(_int(rng, params.n_apps))]
    n_ms = sum(sizes)
    pool = max(1, math.ceil(params.layer_pool_ratio * n_ms))
    pool_sizes = [_uniform(rng, params.layer_size, 2) for _ in range(pool)]

    images = []
    for _ in range(n_ms):
        c = min(_int(rng, params.layers_per_image), pool)
        images.append(sorted(int(l) for l in rng.choice(pool, size=c, replace=False)))
    used = sorted({l for img in images for l in img})
    relabel = {l: i for i, l in enumerate(used)}
    layers = [Layer(relabel[l], pool_sizes[l]) for l in used]

    apps, cursor = [], 0
    for k, a in enumerate(sizes):
        mss = tuple(
            Microservice(k, i + 1, _uniform(rng, params.cpu_demand, 3),
                         frozenset(relabel[l] for l in images[cursor + i]))
            for i in range(a)
        )
        cursor += a
        apps.append(Application(
            id=k,
            microservices=mss,
            traffic=_chain_traffic(rng, a, params),
            source_server=int(rng.integers(0, n)),
            ingress=_uniform(rng, params.ingress, 1),
        ))
    return Instance(servers, layers, apps, hops, adjacency=adj)


def _split_services(rng, params):
    total = params.total_services
    lo, hi = params.services_per_app
    options = [k for k in range(params.n_apps[0], params.n_apps[1] + 1) if k * lo <= total <= k * hi]
    if not options:
        raise ValueError(f"{total} microservices cannot be split into {params.n_apps} apps of {lo}..{hi}")
    k = int(rng.choice(options))
    sizes = [lo] * k
    for _ in range(total - k * lo):
        open_ = [i for i in range(k) if sizes[i] < hi]
        sizes[int(rng.choice(open_))] += 1
    return sizes


def generate_instance(params: GeneratorParams) -> Instance:
    """Draw a capacity-feasible instance, deterministic in ``params.seed``.

    Draws are rejected until a first-fit start point exists.  The result has
    no virtual sources attached.
    """
    from .sca import initial_feasible

    rng = np.random.default_rng(params.seed)
    for _ in range(params.max_retries):
        try:
            inst = _draw(rng, params)
            initial_feasible(inst, seed=0, attempts=8)
        except (InfeasibleInstance, NoFeasiblePoint):
            continue
        return inst
    raise GenerationFailed(f"no feasible instance after {params.max_retries} draws; ranges too tight")
