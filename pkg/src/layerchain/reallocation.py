"""Post-placement cpu reallocation on each server.

Once placement is fixed, the idle cpu of a server is handed out to the
microservices it hosts.  Each microservice ``j`` requests ``u_j`` and receives
``f_j >= u_j``; its evaluation value ``e_j = u_j / f_j`` is the ratio of new to
original processing time.

Two rules are available.  ``proportional`` (the default) scales every request
by ``C / sum(u)``.  ``optimal`` minimizes ``sum(e_j)`` exactly; its solution is
``f_j = max(u_j, sqrt(u_j / mu))`` with ``mu`` chosen so the shares sum to
``C``.  The two coincide when all requests are equal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import OverSubscribed
from .model import Deployment, Instance, ensure_augmented

__all__ = [
    "ReallocationResult",
    "RULES",
    "reallocate",
    "processing_time",
    "reallocate_deployment",
    "kkt_residual",
]

RULES = ("proportional", "optimal")


@dataclass(frozen=True, eq=False)
class ReallocationResult:
    f: np.ndarray  # GHz per microservice
    e: np.ndarray  # u_j / f_j
    total_u_before: float  # sum of e at f = u, i.e. J
    total_u_after: float
    demands: np.ndarray
    capacity: float
    rule: str = "proportional"
    keys: tuple = ()

    def __len__(self):
        return len(self.f)

    def rows(self):
        """Per-microservice table rows ``(key, u, f, e)``."""
        keys = self.keys or tuple(range(len(self.f)))
        return [(k, float(u), float(f), float(e)) for k, u, f, e in zip(keys, self.demands, self.f, self.e)]


def _empty(capacity, rule):
    z = np.zeros(0)
    return ReallocationResult(z, z, 0.0, 0.0, z, float(capacity), rule)


def reallocate(capacity: float, demands, rule: str = "proportional") -> ReallocationResult:
    """Share ``capacity`` GHz among microservices requesting ``demands`` GHz."""
    u = np.asarray(demands, dtype=float)
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    if u.ndim != 1:
        raise ValueError("demands must be one-dimensional")
    if u.size == 0:
        return _empty(capacity, rule)
    if not np.isfinite(u).all() or (u <= 0).any():
        raise ValueError("demands must be finite and positive")
    if not capacity > 0:
        raise ValueError("capacity must be positive")
    total = float(u.sum())
    if total > capacity * (1 + 1e-12):
        raise OverSubscribed(f"demands sum to {total:.6g} GHz, above capacity {capacity:.6g} GHz")

    if rule == "proportional":
        f = u * (capacity / total)
    else:
        f = _water_fill(capacity, u)
    e = u / f
    return ReallocationResult(
        f=f, e=e, total_u_before=float(u.size), total_u_after=float(e.sum()),
        demands=u, capacity=float(capacity), rule=rule,
    )


def _water_fill(capacity, u):
    """Minimize ``sum(u / f)`` over ``f >= u``, ``sum(f) <= capacity``."""
    if np.isclose(u.sum(), capacity, rtol=1e-12, atol=0.0):
        return u.copy()
    r = np.sqrt(u)

    def excess(t):
        # t = 1 / sqrt(mu); shares grow with t
        return np.maximum(u, r * t).sum() - capacity

    hi = 2.0 * capacity / r.min()
    t = brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    f = np.maximum(u, r * t)
    return f * (capacity / f.sum())


def kkt_residual(result: ReallocationResult) -> dict:
    """Residuals of the optimality conditions at ``result.f``.

    ``aggregate`` is the single summed stationarity line
    ``-sum(u/f^2) + sum(lam f) + mu J = 0`` with ``mu`` solved from it and
    ``lam = 0``; it vanishes for any allocation, so it is reported only for
    comparison.  ``stationarity`` is the per-microservice condition
    ``-u_j/f_j^2 - lam_j + mu = 0`` with the best nonnegative multipliers,
    which vanishes only at the true minimizer.  ``complementarity`` covers
    ``lam_j (u_j - f_j)`` and ``mu (sum f - C)``; ``primal`` the constraints.
    """
    u, f, C = result.demands, result.f, result.capacity
    if f.size == 0:
        return {"aggregate": 0.0, "stationarity": 0.0, "complementarity": 0.0, "primal": 0.0, "mu": 0.0}
    g = u / f**2
    J = f.size
    mu_agg = g.sum() / J
    aggregate = abs(-g.sum() + mu_agg * J)

    # per-j: lam_j = mu - g_j must be >= 0 and vanish where f_j > u_j
    free = f > u * (1 + 1e-12)
    mu = float(g[free].mean()) if free.any() else float(g.max())
    lam = np.where(free, 0.0, np.maximum(mu - g, 0.0))
    stationarity = float(np.abs(-g - lam + mu).max())
    complementarity = float(max(np.abs(lam * (u - f)).max(), abs(mu * (f.sum() - C))))
    primal = float(max(np.maximum(u - f, 0.0).max(), max(f.sum() - C, 0.0)))
    return {
        "aggregate": float(aggregate),
        "stationarity": stationarity,
        "complementarity": complementarity,
        "primal": primal,
        "mu": mu,
    }


def processing_time(data: float, f: float) -> float:
    """Seconds to process ``data`` work units at ``f`` GHz."""
    if not f > 0:
        raise ValueError("f must be positive")
    return data / f


def reallocate_deployment(instance: Instance, dep: Deployment, rule: str = "proportional") -> dict:
    """Apply :func:`reallocate` on every server; returns ``{server: result}``.

    Virtual and zero-demand microservices are left out.  Servers hosting
    nothing else get an empty result.
    """
    inst = ensure_augmented(instance)
    hosted = {s.id: [] for s in inst.servers}
    for key, s in sorted(dep.placements.items()):
        j = inst.index[key]
        if not inst.is_virtual[j] and inst.cpu_demand[j] > 0:
            hosted[s].append(key)
    out = {}
    for server in inst.servers:
        keys = hosted[server.id]
        if not keys:
            out[server.id] = _empty(server.cpu, rule)
            continue
        res = reallocate(server.cpu, [inst.cpu_demand[inst.index[k]] for k in keys], rule)
        out[server.id] = ReallocationResult(
            res.f, res.e, res.total_u_before, res.total_u_after, res.demands,
            res.capacity, rule, tuple(keys),
        )
    return out
