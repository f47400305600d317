"""Scenario and deployment types for layer/chain-sharing placement.

Units are fixed throughout the package: layer sizes and storage in MB,
bandwidth in MB/s, delays in seconds, traffic in KB, communication overhead
in hop*KB and cpu in GHz.  Ids of servers, layers and applications are dense
zero-based integers; a microservice is addressed by ``(app, idx)`` where
``idx`` 0 is reserved for the virtual source of the application.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import (
    AlreadyAugmented,
    DimensionMismatch,
    DisconnectedTopology,
    InfeasibleInstance,
    InvalidInstance,
)

__all__ = [
    "Layer",
    "Microservice",
    "Application",
    "Server",
    "HopMatrix",
    "Instance",
    "Deployment",
    "Violation",
    "FeasibilityReport",
    "PlacementState",
    "build_hop_matrix",
    "attach_virtual_sources",
    "ensure_augmented",
    "derive_layer_pulls",
    "check_feasibility",
]

# absolute slack tolerated on capacity sums (float accumulation)
CAPACITY_TOL = 1e-9


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Layer:
    id: int
    size: float

    def __post_init__(self):
        if not self.size > 0:
            raise InvalidInstance(f"layer {self.id}: size must be positive, got {self.size}")


@dataclass(frozen=True)
class Microservice:
    app: int
    idx: int
    cpu_demand: float
    layers: frozenset = frozenset()
    is_virtual: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "layers", frozenset(int(l) for l in self.layers))
        if self.cpu_demand < 0:
            raise InvalidInstance(f"microservice {self.key}: negative cpu demand")
        if self.is_virtual and (self.cpu_demand != 0 or self.layers):
            raise InvalidInstance("a virtual microservice has no cpu demand and no layers")

    @property
    def key(self):
        return (self.app, self.idx)


@dataclass(frozen=True, eq=False)
class Application:
    """A chain of microservices and its directed traffic matrix.

    ``traffic[p, q]`` is indexed by position in ``microservices``.  Before
    augmentation the real microservices carry ``idx`` 1..A and ``ingress`` is
    the volume the source device sends to the first of them; augmentation
    turns it into the edge leaving the virtual source.
    """

    id: int
    microservices: tuple
    traffic: np.ndarray
    source_server: int
    ingress: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "microservices", tuple(self.microservices))
        w = _frozen(self.traffic)
        a = len(self.microservices)
        if w.shape != (a, a):
            raise InvalidInstance(f"app {self.id}: traffic must be {a}x{a}, got {w.shape}")
        if (w < 0).any():
            raise InvalidInstance(f"app {self.id}: negative traffic")
        if np.diagonal(w).any():
            raise InvalidInstance(f"app {self.id}: traffic diagonal must be zero")
        if self.ingress < 0:
            raise InvalidInstance(f"app {self.id}: negative ingress")
        for p, ms in enumerate(self.microservices):
            if ms.app != self.id:
                raise InvalidInstance(f"app {self.id}: microservice {ms.key} belongs elsewhere")
            if ms.is_virtual and p != 0:
                raise InvalidInstance(f"app {self.id}: virtual microservice must come first")
        object.__setattr__(self, "traffic", w)

    @property
    def augmented(self):
        return bool(self.microservices) and self.microservices[0].is_virtual

    def __len__(self):
        return len(self.microservices)


@dataclass(frozen=True)
class Server:
    id: int
    cpu: float
    storage: float
    cloud_bw: float
    name: str = ""

    def __post_init__(self):
        for attr in ("cpu", "storage", "cloud_bw"):
            if not getattr(self, attr) > 0:
                raise InvalidInstance(f"server {self.id}: {attr} must be positive")


@dataclass(frozen=True, eq=False)
class HopMatrix:
    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InvalidInstance("hop matrix must be square")
        if not np.isfinite(d).all():
            raise DisconnectedTopology("hop matrix has unreachable pairs")
        if (d < 0).any() or np.diagonal(d).any() or not np.array_equal(d, d.T):
            raise InvalidInstance("hop matrix must be symmetric, non-negative, zero on the diagonal")
        if d.size and (d[:, None, :] > d[:, :, None] + d[None, :, :]).any():  # d[a,c] > d[a,b] + d[b,c]
            raise InvalidInstance("hop matrix violates the triangle inequality")
        object.__setattr__(self, "d", _frozen(d, dtype=np.int64))

    @property
    def n(self):
        return self.d.shape[0]

    @property
    def max_hop(self):
        return int(self.d.max()) if self.d.size else 0


def build_hop_matrix(adjacency) -> HopMatrix:
    """Shortest-path hop counts of an undirected, connected topology."""
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInstance("adjacency must be square")
    a = a.astype(bool)
    if not np.array_equal(a, a.T):
        raise InvalidInstance("adjacency must be symmetric")
    if np.diagonal(a).any():
        raise InvalidInstance("adjacency must have a zero diagonal")
    dist = shortest_path(csr_matrix(a.astype(float)), directed=False, unweighted=True)
    if not np.isfinite(dist).all():
        raise DisconnectedTopology("topology is not connected")
    return HopMatrix(dist.astype(np.int64))


@dataclass(frozen=True, eq=False)
class Instance:
    servers: tuple
    layers: tuple
    apps: tuple
    hops: HopMatrix
    adjacency: np.ndarray | None = None

    def __post_init__(self):
        for name in ("servers", "layers", "apps"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.adjacency is not None:
            object.__setattr__(self, "adjacency", _frozen(self.adjacency, dtype=np.int8))
        n = len(self.servers)
        if n == 0:
            raise InvalidInstance("an instance needs at least one server")
        if [s.id for s in self.servers] != list(range(n)):
            raise InvalidInstance("server ids must be dense 0..N-1")
        if [l.id for l in self.layers] != list(range(len(self.layers))):
            raise InvalidInstance("layer ids must be dense 0..L-1")
        if [a.id for a in self.apps] != list(range(len(self.apps))):
            raise InvalidInstance("application ids must be dense 0..K-1")
        if self.hops.n != n:
            raise InvalidInstance(f"hop matrix is {self.hops.n}x{self.hops.n} for {n} servers")
        n_layers = len(self.layers)
        for app in self.apps:
            if not 0 <= app.source_server < n:
                raise InvalidInstance(f"app {app.id}: unknown source server {app.source_server}")
            offset = 0 if app.augmented else 1
            for p, ms in enumerate(app.microservices):
                if ms.idx != p + offset:
                    raise InvalidInstance(f"app {app.id}: microservice idx {ms.idx} at position {p}")
                bad = [l for l in ms.layers if not 0 <= l < n_layers]
                if bad:
                    raise InvalidInstance(f"microservice {ms.key}: unknown layers {bad}")
        if len({a.augmented for a in self.apps}) > 1:
            raise InvalidInstance("either all or no applications carry a virtual source")
        demand = sum(ms.cpu_demand for a in self.apps for ms in a.microservices)
        capacity = sum(s.cpu for s in self.servers)
        if demand > capacity + CAPACITY_TOL:
            raise InfeasibleInstance(
                f"total cpu demand {demand:.4f} GHz exceeds capacity {capacity:.4f} GHz"
            )

    @property
    def augmented(self):
        return bool(self.apps) and self.apps[0].augmented

    @property
    def n_servers(self):
        return len(self.servers)

    @property
    def n_layers(self):
        return len(self.layers)

    # flat views, microservices in (app, idx) order

    @cached_property
    def microservices(self):
        return tuple(ms for app in self.apps for ms in app.microservices)

    @cached_property
    def keys(self):
        return tuple(ms.key for ms in self.microservices)

    @cached_property
    def index(self):
        return {key: j for j, key in enumerate(self.keys)}

    @property
    def n_ms(self):
        return len(self.microservices)

    @cached_property
    def E(self):
        """Microservice-by-layer incidence matrix (0/1 floats)."""
        e = np.zeros((self.n_ms, self.n_layers))
        for j, ms in enumerate(self.microservices):
            e[j, sorted(ms.layers)] = 1.0
        e.setflags(write=False)
        return e

    @cached_property
    def layer_sizes(self):
        return _frozen([l.size for l in self.layers])

    @cached_property
    def cpu_demand(self):
        return _frozen([ms.cpu_demand for ms in self.microservices])

    @cached_property
    def image_sizes(self):
        return _frozen(self.E @ self.layer_sizes)

    @cached_property
    def bandwidth(self):
        return _frozen([s.cloud_bw for s in self.servers])

    @cached_property
    def cpu_capacity(self):
        return _frozen([s.cpu for s in self.servers])

    @cached_property
    def storage_capacity(self):
        return _frozen([s.storage for s in self.servers])

    @cached_property
    def traffic(self):
        """Block-diagonal directed traffic over flat microservice indices."""
        w = np.zeros((self.n_ms, self.n_ms))
        start = 0
        for app in self.apps:
            a = len(app)
            w[start:start + a, start:start + a] = app.traffic
            start += a
        w.setflags(write=False)
        return w

    @cached_property
    def pinned(self):
        """Flat index -> server for every virtual source."""
        return {
            self.index[app.microservices[0].key]: app.source_server
            for app in self.apps
            if app.augmented
        }

    @cached_property
    def is_virtual(self):
        return _frozen([ms.is_virtual for ms in self.microservices], dtype=bool)


def attach_virtual_sources(instance: Instance) -> Instance:
    """Prepend the zero-cost virtual source ``ms^{k0}`` to every application.

    The new leading row of each traffic matrix is zero except for the edge to
    the first real microservice, which carries the application's ingress.
    """
    if instance.augmented:
        raise AlreadyAugmented("instance already has virtual sources")
    apps = []
    for app in instance.apps:
        a = len(app)
        w = np.zeros((a + 1, a + 1))
        w[1:, 1:] = app.traffic
        if a:
            w[0, 1] = app.ingress
        source = Microservice(app.id, 0, 0.0, frozenset(), is_virtual=True, name="source")
        apps.append(replace(app, microservices=(source,) + app.microservices, traffic=w))
    return replace(instance, apps=tuple(apps))


def ensure_augmented(instance: Instance) -> Instance:
    return instance if instance.augmented else attach_virtual_sources(instance)


def _assignment(instance: Instance, x) -> np.ndarray:
    if isinstance(x, Mapping):
        try:
            return np.array([x[key] for key in instance.keys], dtype=np.int64)
        except KeyError as exc:
            raise DimensionMismatch(f"placement misses microservice {exc.args[0]}") from None
    a = np.asarray(x, dtype=np.int64)
    if a.shape != (instance.n_ms,):
        raise DimensionMismatch(f"assignment has shape {a.shape}, expected ({instance.n_ms},)")
    return a


def derive_layer_pulls(instance: Instance, x) -> np.ndarray:
    """Layers each server must pull: ``d[n, l] = min(sum_j x[j, n] E[j, l], 1)``.

    ``x`` is a placement map ``(k, i) -> server`` or a flat assignment array.
    """
    a = _assignment(instance, x)
    onehot = np.zeros((instance.n_ms, instance.n_servers))
    onehot[np.arange(instance.n_ms), a] = 1.0
    return (onehot.T @ instance.E > 0).astype(np.int8)


@dataclass(frozen=True, eq=False)
class Deployment:
    placements: Mapping
    pulls: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "placements", dict(self.placements))
        object.__setattr__(self, "pulls", _frozen(self.pulls, dtype=np.int8))

    @classmethod
    def from_assignment(cls, instance: Instance, assign) -> Deployment:
        a = _assignment(instance, assign)
        placements = {key: int(n) for key, n in zip(instance.keys, a)}
        return cls(placements, derive_layer_pulls(instance, a))

    def assignment(self, instance: Instance) -> np.ndarray:
        return _assignment(instance, self.placements)

    def __eq__(self, other):
        if not isinstance(other, Deployment):
            return NotImplemented
        return self.placements == other.placements and np.array_equal(self.pulls, other.pulls)

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    constraint: str  # assignment | layer_pulls | storage | cpu | virtual_source
    server: int | None = None
    microservice: tuple | None = None
    slack: float | None = None
    detail: str = ""


@dataclass
class FeasibilityReport:
    violations: list = field(default_factory=list)

    @property
    def feasible(self):
        return not self.violations

    def __bool__(self):
        return self.feasible


def check_feasibility(instance: Instance, dep: Deployment) -> FeasibilityReport:
    """Check unique assignment, pull induction, storage, cpu and pinned sources."""
    n, L = instance.n_servers, instance.n_layers
    pulls = np.asarray(dep.pulls)
    if pulls.shape != (n, L):
        raise DimensionMismatch(f"layer pulls are {pulls.shape}, expected {(n, L)}")
    report = FeasibilityReport()
    known = set(instance.keys)
    for key in dep.placements:
        if key not in known:
            report.violations.append(Violation("assignment", microservice=key, detail="unknown microservice"))
    assign = np.full(instance.n_ms, -1, dtype=np.int64)
    for j, key in enumerate(instance.keys):
        s = dep.placements.get(key)
        if s is None:
            report.violations.append(Violation("assignment", microservice=key, detail="not placed"))
        elif not 0 <= s < n:
            report.violations.append(Violation("assignment", server=s, microservice=key, detail="unknown server"))
        else:
            assign[j] = s
    if (assign < 0).any():
        return report

    induced = derive_layer_pulls(instance, assign)
    for s, l in zip(*np.nonzero(induced != pulls)):
        report.violations.append(
            Violation("layer_pulls", server=int(s), detail=f"layer {l}: d={pulls[s, l]}, induced {induced[s, l]}")
        )
    stored = induced @ instance.layer_sizes
    cpu = np.bincount(assign, weights=instance.cpu_demand, minlength=n)
    for s in range(n):
        slack = instance.storage_capacity[s] - stored[s]
        if slack < -CAPACITY_TOL:
            report.violations.append(Violation("storage", server=s, slack=float(slack)))
        slack = instance.cpu_capacity[s] - cpu[s]
        if slack < -CAPACITY_TOL:
            report.violations.append(Violation("cpu", server=s, slack=float(slack)))
    for j, s in instance.pinned.items():
        if assign[j] != s:
            report.violations.append(
                Violation("virtual_source", server=int(assign[j]), microservice=instance.keys[j],
                          detail=f"must sit on server {s}")
            )
    return report


class PlacementState:
    """Incremental bookkeeping for greedy constructions.

    Virtual sources are placed on their source servers at construction.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        self.assign = np.full(instance.n_ms, -1, dtype=np.int64)
        self.cpu_used = np.zeros(instance.n_servers)
        self.stored = np.zeros(instance.n_servers)
        self.present = np.zeros((instance.n_servers, instance.n_layers), dtype=bool)
        for j, s in instance.pinned.items():
            self.place(j, s)

    def placed(self, j):
        return self.assign[j] >= 0

    def missing(self, j, n):
        return (self.instance.E[j] > 0) & ~self.present[n]

    def extra_bytes(self, j, n):
        return float(self.instance.layer_sizes[self.missing(j, n)].sum())

    def local_bytes(self, j, n):
        have = (self.instance.E[j] > 0) & self.present[n]
        return float(self.instance.layer_sizes[have].sum())

    def holds_image(self, j, n):
        return not self.missing(j, n).any()

    def residual_cpu(self, n):
        return self.instance.cpu_capacity[n] - self.cpu_used[n]

    def fits(self, j, n):
        inst = self.instance
        return (
            self.cpu_used[n] + inst.cpu_demand[j] <= inst.cpu_capacity[n] + CAPACITY_TOL
            and self.stored[n] + self.extra_bytes(j, n) <= inst.storage_capacity[n] + CAPACITY_TOL
        )

    def place(self, j, n):
        self.stored[n] += self.extra_bytes(j, n)
        self.present[n] |= self.instance.E[j] > 0
        self.cpu_used[n] += self.instance.cpu_demand[j]
        self.assign[j] = n

    def deployment(self) -> Deployment:
        if (self.assign < 0).any():
            raise ValueError("not every microservice is placed")
        return Deployment.from_assignment(self.instance, self.assign)


def placement_from_assignment(instance: Instance, assign: Sequence[int]) -> dict:
    return {key: int(n) for key, n in zip(instance.keys, assign)}
