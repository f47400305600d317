"""Comparison strategies: GDS, LS, K8S, LDS and CDS.

LDS and CDS are the SCA solver pinned to ``theta = 1`` and ``theta = 0``.
"""

from __future__ import annotations

import enum
from dataclasses import replace

from .greedy import gds, k8s_default, ls
from .model import Instance
from .sca import ScaConfig, sca_solve

__all__ = ["BaselineKind", "gds", "ls", "k8s_default", "lds", "cds", "METHODS", "solve_with"]


class BaselineKind(enum.Enum):
    GDS = "gds"
    LS = "ls"
    K8S = "k8s"
    LDS = "lds"
    CDS = "cds"


def lds(instance: Instance, cfg: ScaConfig = ScaConfig()):
    """Layer-sharing only: SCA at ``theta = 1``; returns ``(Deployment, trace)``."""
    return sca_solve(instance, replace(cfg, theta=1.0))


def cds(instance: Instance, cfg: ScaConfig = ScaConfig()):
    """Chain-sharing only: SCA at ``theta = 0``; returns ``(Deployment, trace)``."""
    return sca_solve(instance, replace(cfg, theta=0.0))


METHODS = ("sca", "gds", "ls", "k8s", "lds", "cds")


def solve_with(method: str, instance: Instance, theta: float, cfg: ScaConfig = ScaConfig()):
    """Dispatch by method name; returns ``(Deployment, trace or None)``."""
    if method == "sca":
        return sca_solve(instance, replace(cfg, theta=theta))
    if method == "lds":
        return lds(instance, cfg)
    if method == "cds":
        return cds(instance, cfg)
    if method == "gds":
        return gds(instance, theta), None
    if method == "ls":
        return ls(instance), None
    if method == "k8s":
        return k8s_default(instance), None
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
