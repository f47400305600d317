"""Exact branch-and-bound for the convex approximation subproblem.

Over binary placements the subproblem objective reduces to::

    c1 * T(x) + c2 * R(x) + sum_j lin[j, x_j] + const

because ``x^T x`` equals the microservice count.  Branching assigns one
microservice to a server per level, in flat ``(k, i)`` order with children in
server order; layer pulls follow from the fixed part of the assignment.  The
node bound adds, per unassigned microservice, the cheapest server for

* its linear term,
* the traffic to already-placed chain partners,
* its missing layers, each charged ``1 / m_l`` of the pull cost where
  ``m_l`` counts the unassigned microservices that contain layer ``l``,

and then accounts exactly for traffic between unassigned microservices along
a maximum-weight spanning forest of the traffic graph, by dynamic programming
over the forest with capacities relaxed.  Edges off the forest are bounded by
zero.  The result never exceeds the cost of any completion.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExhausted, Infeasible
from .model import CAPACITY_TOL, derive_layer_pulls
from .vectorize import encode_d, encode_x

__all__ = ["SubproblemStats", "SubproblemResult", "solve_subproblem"]


@dataclass
class SubproblemStats:
    nodes_expanded: int = 0
    nodes_generated: int = 0
    nodes_pruned: int = 0
    incumbent_updates: int = 0
    optimal: bool = True
    budget: int = 0

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class SubproblemResult:
    assign: np.ndarray
    pulls: np.ndarray
    value: float
    stats: SubproblemStats
    z_x: np.ndarray
    z_d: np.ndarray

    def __iter__(self):
        return iter((self.z_x, self.z_d, self.stats))


class _State:
    __slots__ = ("assign", "present", "cpu", "stored", "cost")

    def __init__(self, assign, present, cpu, stored, cost):
        self.assign = assign
        self.present = present
        self.cpu = cpu
        self.stored = stored
        self.cost = cost


class _Search:
    def __init__(self, spec):
        inst = spec.instance
        self.spec = spec
        self.n = inst.n_servers
        self.E = inst.E
        self.Eb = inst.E > 0
        self.S = inst.layer_sizes
        self.u = inst.cpu_demand
        self.cap_cpu = inst.cpu_capacity
        self.cap_sto = inst.storage_capacity
        self.D = inst.hops.d.astype(float)
        self.wsym = inst.traffic + inst.traffic.T
        self.pull_cost = self.S[None, :] / inst.bandwidth[:, None]  # (N, L)
        self.c1, self.c2, self.lin = spec.c1, spec.c2, spec.lin
        self.pinned = dict(inst.pinned)
        self.order = np.array([j for j in range(inst.n_ms) if j not in self.pinned], dtype=np.int64)
        self.parent, self.postorder = _spanning_forest(self.wsym, self.order)

    def root(self):
        assign = np.full(len(self.u), -1, dtype=np.int64)
        st = _State(assign, np.zeros((self.n, self.E.shape[1]), dtype=bool),
                    np.zeros(self.n), np.zeros(self.n), 0.0)
        for j, s in sorted(self.pinned.items()):
            self._place(st, j, s)
        return st

    def rebuild(self, prefix):
        st = self.root()
        for j, s in zip(self.order, prefix):
            self._place(st, j, s)
        return st

    def _increment(self, st, j, s):
        missing = self.Eb[j] & ~st.present[s]
        placed = st.assign >= 0
        comm = self.wsym[j, placed] @ self.D[s, st.assign[placed]] if placed.any() else 0.0
        return (self.c1 * self.pull_cost[s, missing].sum() + self.c2 * comm + self.lin[j, s],
                self.S[missing].sum())

    def _place(self, st, j, s):
        inc, extra = self._increment(st, j, s)
        st.cost += inc
        st.stored[s] += extra
        st.cpu[s] += self.u[j]
        st.present[s] |= self.Eb[j]
        st.assign[j] = s

    def child(self, st, j, s):
        c = _State(st.assign.copy(), st.present.copy(), st.cpu.copy(), st.stored.copy(), st.cost)
        self._place(c, j, s)
        return c

    def fits(self, st, j, s):
        if st.cpu[s] + self.u[j] > self.cap_cpu[s] + CAPACITY_TOL:
            return False
        extra = self.S[self.Eb[j] & ~st.present[s]].sum()
        return st.stored[s] + extra <= self.cap_sto[s] + CAPACITY_TOL

    def bound(self, st, depth):
        rest = self.order[depth:]
        if rest.size == 0:
            return st.cost
        placed = np.flatnonzero(st.assign >= 0)
        E_rest = self.E[rest]
        m = E_rest.sum(axis=0)
        share = np.divide(1.0, m, out=np.zeros_like(m), where=m > 0)
        missing = ~st.present
        h = self.lin[rest] + self.c1 * ((E_rest * share) @ (missing * self.pull_cost).T)
        if self.c2 and placed.size:
            h = h + self.c2 * (self.wsym[np.ix_(rest, placed)] @ self.D[st.assign[placed], :])
        extra = E_rest @ (missing * self.S).T
        ok = (self.u[rest, None] <= self.cap_cpu - st.cpu + CAPACITY_TOL) & (
            extra <= self.cap_sto - st.stored + CAPACITY_TOL
        )
        h = np.where(ok, h, np.inf)
        if not self.c2:
            return st.cost + float(h.min(axis=1).sum())
        # leaves first; a child whose parent is already placed roots its subtree
        msgs = dict(zip(rest.tolist(), h))
        total = st.cost
        for j in self.postorder:
            msg = msgs.get(j)
            if msg is None:
                continue
            p = self.parent[j]
            if p >= 0 and p in msgs:
                w = self.c2 * self.wsym[j, p]
                msgs[p] = msgs[p] + (msg[:, None] + w * self.D).min(axis=0)
            else:
                total += float(msg.min())
        return total

    def dive(self, st, depth):
        """Greedy completion choosing the cheapest exact increment each step."""
        st = _State(st.assign.copy(), st.present.copy(), st.cpu.copy(), st.stored.copy(), st.cost)
        for j in self.order[depth:]:
            best, best_s = np.inf, -1
            for s in range(self.n):
                if self.fits(st, j, s):
                    inc = self._increment(st, j, s)[0]
                    if inc < best:
                        best, best_s = inc, s
            if best_s < 0:
                return None
            self._place(st, j, best_s)
        return st


def solve_subproblem(spec, budget=None) -> SubproblemResult:
    """Minimize the subproblem exactly, best-first.

    Stops after ``budget`` node expansions (default ``spec.budget``) and then
    returns the incumbent with ``stats.optimal`` cleared and a
    :class:`BudgetExhausted` warning.  The reference point, when binary and
    feasible, seeds the incumbent, so the result never exceeds its value.
    """
    budget = spec.budget if budget is None else budget
    search = _Search(spec)
    stats = SubproblemStats(budget=budget)
    inst = spec.instance

    best_val, best_assign = np.inf, None

    def offer(assign):
        nonlocal best_val, best_assign
        val = spec.value(assign)
        if val < best_val - _tol(best_val):
            best_val, best_assign = val, assign.copy()
            stats.incumbent_updates += 1

    if spec.reference is not None:
        offer(spec.reference)
    root = search.root()
    dived = search.dive(root, 0)
    if dived is not None:
        offer(dived.assign)

    order = search.order
    depth_total = len(order)
    heap = []
    counter = 0
    if depth_total == 0:
        offer(root.assign)
    else:
        heapq.heappush(heap, (search.bound(root, 0), counter, b""))

    while heap:
        bound, _, prefix_bytes = heap[0]
        if bound >= best_val - _tol(best_val):
            break
        if stats.nodes_expanded >= budget:
            stats.optimal = False
            break
        heapq.heappop(heap)
        stats.nodes_expanded += 1
        prefix = np.frombuffer(prefix_bytes, dtype=np.int16)
        depth = len(prefix)
        st = search.rebuild(prefix)
        j = order[depth]
        for s in range(search.n):
            if not search.fits(st, j, s):
                stats.nodes_pruned += 1
                continue
            c = search.child(st, j, s)
            stats.nodes_generated += 1
            if depth + 1 == depth_total:
                offer(c.assign)
                continue
            b = search.bound(c, depth + 1)
            if b >= best_val - _tol(best_val):
                stats.nodes_pruned += 1
                continue
            counter += 1
            heapq.heappush(heap, (b, counter, prefix_bytes + np.int16(s).tobytes()))

    if best_assign is None:
        if not stats.optimal:
            raise Infeasible(f"no feasible assignment found within {budget} nodes")
        raise Infeasible("subproblem has no feasible assignment")
    if not stats.optimal:
        warnings.warn(
            f"subproblem stopped after {budget} node expansions; incumbent {best_val:.6g} may be suboptimal",
            BudgetExhausted,
            stacklevel=2,
        )
    pulls = derive_layer_pulls(inst, best_assign)
    return SubproblemResult(
        assign=best_assign,
        pulls=pulls,
        value=float(best_val),
        stats=stats,
        z_x=encode_x(inst, best_assign),
        z_d=encode_d(pulls),
    )


def _spanning_forest(wsym, nodes):
    """Maximum spanning forest over ``nodes``; returns parent map and post-order."""
    nodes = [int(j) for j in nodes]
    root = {j: j for j in nodes}

    def find(a):
        while root[a] != a:
            root[a] = root[root[a]]
            a = root[a]
        return a

    sub = wsym[np.ix_(nodes, nodes)]
    ii, jj = np.nonzero(np.triu(sub, 1))
    edges = sorted(zip(-sub[ii, jj], ii.tolist(), jj.tolist()))
    adj = {j: [] for j in nodes}
    for _, a, b in edges:
        a, b = nodes[a], nodes[b]
        ra, rb = find(a), find(b)
        if ra != rb:
            root[ra] = rb
            adj[a].append(b)
            adj[b].append(a)
    parent = {j: -1 for j in nodes}
    order, seen = [], set()
    for r in nodes:
        if r in seen:
            continue
        seen.add(r)
        stack = [r]
        while stack:
            a = stack.pop()
            order.append(a)
            for b in sorted(adj[a]):
                if b not in seen:
                    seen.add(b)
                    parent[b] = a
                    stack.append(b)
    return parent, order[::-1]


def _tol(value):
    return 1e-10 * max(1.0, abs(value)) if np.isfinite(value) else 0.0
