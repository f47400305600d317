"""Greedy placement strategies: GDS, LS and K8S.

All three place virtual sources first and never revisit a decision.
"""

from __future__ import annotations

import numpy as np

from .errors import NoFeasiblePlacement
from .model import Deployment, Instance, PlacementState, ensure_augmented

__all__ = ["gds", "ls", "k8s_default"]


def _closest_feasible(state: PlacementState, j, origin):
    """Servers by hop distance from ``origin``; ties by residual cpu, then id."""
    inst = state.instance
    ranked = sorted(
        range(inst.n_servers),
        key=lambda n: (inst.hops.d[origin, n], -state.residual_cpu(n), n),
    )
    for n in ranked:
        if state.fits(j, n):
            return n
    raise NoFeasiblePlacement(f"no server can host microservice {inst.keys[j]}")


def _max_bandwidth_feasible(state: PlacementState, j):
    inst = state.instance
    ranked = sorted(range(inst.n_servers), key=lambda n: (-inst.bandwidth[n], n))
    for n in ranked:
        if state.fits(j, n):
            return n
    raise NoFeasiblePlacement(f"no server can host microservice {inst.keys[j]}")


def _normalized(values, weight):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values
    lo, hi = values.min(), values.max()
    span = hi - lo
    if span <= 0:
        return np.full_like(values, weight)
    return weight * (values - lo) / span


def gds(instance: Instance, theta: float = 0.5) -> Deployment:
    """Greedy deployment over a single priority list of chain and layer items.

    Chain edges are weighted by ``1 - theta`` and layers by ``theta``, the
    same roles the two terms play in the utility.  A chain item puts the
    unplaced endpoint next to the placed one (closest server with room); a
    layer item puts each unplaced microservice containing the layer on the
    highest-bandwidth server with room.
    """
    inst = ensure_augmented(instance)
    state = PlacementState(inst)

    edges = [(int(i), int(j)) for i, j in zip(*np.nonzero(inst.traffic))]
    w_new = _normalized([inst.traffic[i, j] for i, j in edges], 1.0 - theta)
    members = [np.flatnonzero(inst.E[:, l] > 0) for l in range(inst.n_layers)]
    layer_ids = [l for l in range(inst.n_layers) if members[l].size]
    s_new = _normalized([inst.layer_sizes[l] for l in layer_ids], theta)

    items = [(-v, 0, i, j) for v, (i, j) in zip(w_new, edges)]
    items += [(-v, 1, l, 0) for v, l in zip(s_new, layer_ids)]
    items.sort()

    for _, kind, a, b in items:
        if kind == 0:
            if state.placed(a) and state.placed(b):
                continue
            if not state.placed(a) and not state.placed(b):
                state.place(a, _max_bandwidth_feasible(state, a))
            src, dst = (a, b) if state.placed(a) else (b, a)
            state.place(dst, _closest_feasible(state, dst, state.assign[src]))
        else:
            for j in members[a]:
                if not state.placed(j):
                    state.place(j, _max_bandwidth_feasible(state, j))

    for j in np.flatnonzero(state.assign < 0):
        state.place(j, _max_bandwidth_feasible(state, j))
    return state.deployment()


def _image_order(inst: Instance):
    real = [j for j in range(inst.n_ms) if j not in inst.pinned]
    return sorted(real, key=lambda j: (-inst.image_sizes[j], j))


def ls(instance: Instance) -> Deployment:
    """Layer-match scheduling: most locally present layer bytes wins."""
    inst = ensure_augmented(instance)
    state = PlacementState(inst)
    for j in _image_order(inst):
        candidates = [n for n in range(inst.n_servers) if state.fits(j, n)]
        if not candidates:
            raise NoFeasiblePlacement(f"no server can host microservice {inst.keys[j]}")
        best = min(candidates, key=lambda n: (-state.local_bytes(j, n), -inst.bandwidth[n], n))
        state.place(j, best)
    return state.deployment()


def k8s_default(instance: Instance) -> Deployment:
    """Servers already holding the whole image first, else least bytes to pull."""
    inst = ensure_augmented(instance)
    state = PlacementState(inst)
    for j in _image_order(inst):
        candidates = [n for n in range(inst.n_servers) if state.fits(j, n)]
        if not candidates:
            raise NoFeasiblePlacement(f"no server can host microservice {inst.keys[j]}")
        best = min(
            candidates,
            key=lambda n: (not state.holds_image(j, n), state.extra_bytes(j, n), -inst.bandwidth[n], n),
        )
        state.place(j, best)
    return state.deployment()
