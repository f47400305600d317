"""Image pull delay, communication overhead and the scalarized utility."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBounds, DimensionMismatch
from .model import Instance, _assignment, ensure_augmented
from .vectorize import VectorizedModel

__all__ = [
    "UtilityConfig",
    "pull_delay",
    "communication_overhead",
    "normalization_bounds",
    "utility",
    "evaluate",
]


@dataclass(frozen=True)
class UtilityConfig:
    """Weight and normalization ranges of ``F = theta*T~ + (1-theta)*R~``.

    A collapsed range (``t_max == t_min``) is normalized by 1 instead.
    """

    theta: float
    t_min: float
    t_max: float
    r_min: float
    r_max: float
    include_const: bool = True

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.t_max < self.t_min or self.r_max < self.r_min:
            raise ValueError("normalization bounds are inverted")

    @property
    def t_span(self):
        span = self.t_max - self.t_min
        return span if span > 0 else 1.0

    @property
    def r_span(self):
        span = self.r_max - self.r_min
        return span if span > 0 else 1.0

    @property
    def c1(self):
        return self.theta / self.t_span

    @property
    def c2(self):
        return (1.0 - self.theta) / self.r_span

    @property
    def const(self):
        return -self.c1 * self.t_min - self.c2 * self.r_min

    def with_theta(self, theta):
        return UtilityConfig(theta, self.t_min, self.t_max, self.r_min, self.r_max, self.include_const)


def pull_delay(source, d) -> float:
    """Total image pull delay ``sum_n sum_l d[n, l] S_l / b_n`` in seconds.

    ``source`` is an :class:`Instance` (``d`` as an N x L matrix) or a
    :class:`VectorizedModel` (``d`` either shape).
    """
    if isinstance(source, VectorizedModel):
        d = np.asarray(d, dtype=float)
        if d.size != source.d_len:
            raise DimensionMismatch(f"d has {d.size} entries, model expects {source.d_len}")
        return float(source.M @ d.ravel())
    d = np.asarray(d, dtype=float)
    if d.shape != (source.n_servers, source.n_layers):
        raise DimensionMismatch(f"d is {d.shape}, expected {(source.n_servers, source.n_layers)}")
    per_server = d @ source.layer_sizes
    return float(np.sum(per_server / source.bandwidth))


def communication_overhead(instance: Instance, x) -> float:
    """``sum_k sum_ij w^k_ij * D[x(k,i), x(k,j)]`` in hop*KB."""
    a = _assignment(instance, x)
    hops = instance.hops.d[np.ix_(a, a)]
    return float(np.sum(instance.traffic * hops))


def normalization_bounds(instance: Instance, theta: float = 0.5, include_const: bool = True) -> UtilityConfig:
    """Analytic bounds valid for every feasible deployment.

    The pull delay is at least every used layer pulled once at the best
    bandwidth and at most every full image pulled at the worst one; the
    overhead lies between 0 and all traffic crossing the network diameter.
    """
    instance = ensure_augmented(instance)
    used = instance.E.sum(axis=0) > 0
    t_min = float(instance.layer_sizes[used].sum() / instance.bandwidth.max())
    t_max = float(instance.image_sizes.sum() / instance.bandwidth.min())
    r_max = float(instance.traffic.sum() * instance.hops.max_hop)
    if math.isclose(t_max, t_min) or t_max <= t_min:
        warnings.warn(f"pull delay range collapsed at {t_min:.6g} s", DegenerateBounds, stacklevel=2)
        t_max = t_min = max(t_min, t_max)
    if r_max <= 0.0:
        warnings.warn("communication overhead range collapsed at 0", DegenerateBounds, stacklevel=2)
    return UtilityConfig(theta, t_min, t_max, 0.0, r_max, include_const)


def utility(cfg: UtilityConfig, T: float, R: float) -> float:
    value = cfg.c1 * T + cfg.c2 * R
    if cfg.include_const:
        value += cfg.const
    return float(value)


def evaluate(instance: Instance, dep, cfg: UtilityConfig):
    """``(F, T, R)`` of a deployment."""
    T = pull_delay(instance, dep.pulls)
    R = communication_overhead(instance, dep.placements)
    return utility(cfg, T, R), T, R
