"""Successive convex approximation for the scalarized placement problem.

The quadratic ``Q = W + W^T`` is split as ``P - N`` with ``P = Q + lambda I``
positive semidefinite and ``N = lambda I``; the concave part is linearized at
the current iterate, giving a convex majorizer that is minimized exactly by
:func:`layerchain.subproblem.solve_subproblem`.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExhausted, InfeasibleReference, NoFeasiblePlacement, NoFeasiblePoint, NonFiniteEntries
from .model import CAPACITY_TOL, Deployment, Instance, PlacementState, check_feasibility, ensure_augmented
from .objective import UtilityConfig, normalization_bounds
from .subproblem import SubproblemStats, solve_subproblem
from .vectorize import VectorizedModel, decode_x, encode, encode_d, encode_x, vectorize

__all__ = [
    "ScaConfig",
    "SplitMatrices",
    "SubproblemSpec",
    "ScaIterate",
    "ScaTrace",
    "split_matrix",
    "spectral_radius",
    "build_subproblem",
    "initial_feasible",
    "sca_solve",
    "surrogate_value",
]


WARM_STARTS = ("portfolio", "ffd")


@dataclass(frozen=True)
class ScaConfig:
    alpha: float = 1.0
    epsilon: float = 0.5
    max_iters: int = 50
    theta: float = 0.5
    subproblem_budget: int = 2_000
    seed: int = 0
    warm_start: str = "portfolio"  # portfolio | ffd

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.warm_start not in WARM_STARTS:
            raise ValueError(f"warm_start must be one of {WARM_STARTS}")

    @property
    def relaxed(self):
        return self.alpha < 1.0


@dataclass(frozen=True, eq=False)
class SplitMatrices:
    P: np.ndarray
    N_mat: np.ndarray
    lambda_q: float


def spectral_radius(Q, max_iter=200, rtol=1e-10) -> float:
    """Power-iteration estimate of ``max |eig(Q)|`` for symmetric ``Q``."""
    n = Q.shape[0]
    if n == 0 or not Q.any():
        return 0.0
    v = np.ones(n) + np.random.default_rng(0).uniform(-0.5, 0.5, n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = Q @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return est
        if abs(norm - est) <= rtol * norm:
            est = norm
            break
        est, v = norm, w / norm
    return float(est)


def split_matrix(Q) -> SplitMatrices:
    """Eigen-shift split ``Q = (Q + lambda I) - lambda I``.

    ``lambda`` is the power-iteration radius inflated by 1%; if the shifted
    matrix still has a negative eigenvalue (slow convergence), the Gershgorin
    bound ``max_i sum_j |Q_ij|`` is used instead.
    """
    Q = np.asarray(Q, dtype=float)
    if not np.isfinite(Q).all():
        raise NonFiniteEntries("Q contains non-finite entries")
    Q = 0.5 * (Q + Q.T)
    n = Q.shape[0]
    lam = 1.01 * spectral_radius(Q)
    P = Q + lam * np.eye(n)
    if n and np.linalg.eigvalsh(P).min() < -1e-8 * max(1.0, lam):
        lam = float(np.abs(Q).sum(axis=1).max())
        P = Q + lam * np.eye(n)
    return SplitMatrices(P=P, N_mat=lam * np.eye(n), lambda_q=float(lam))


@dataclass(frozen=True, eq=False)
class SubproblemSpec:
    """The convex approximation around ``(x_bar, d_bar)``.

    ``lin`` and ``const`` are the binary-domain reduction of the linearized
    terms used by the branch-and-bound; :meth:`objective` is the matrix form.
    """

    model: VectorizedModel
    split: SplitMatrices
    c1: float
    c2: float
    x_bar: np.ndarray
    d_bar: np.ndarray
    lin: np.ndarray
    const: float
    reference: np.ndarray | None
    budget: int

    @property
    def instance(self):
        return self.model.instance

    def objective(self, x_vec, d_vec):
        x_vec = np.asarray(x_vec, float)
        d_vec = np.asarray(d_vec, float)
        N = self.split.N_mat
        return float(
            self.c1 * (self.model.M @ d_vec)
            + 0.5 * self.c2 * (x_vec @ self.split.P @ x_vec)
            - self.c2 * (self.x_bar @ N @ x_vec)
            + 0.5 * self.c2 * (self.x_bar @ N @ self.x_bar)
        )

    def value(self, assign):
        """Objective of a binary assignment with induced layer pulls."""
        inst = self.instance
        assign = np.asarray(assign)
        onehot = np.zeros((inst.n_ms, inst.n_servers))
        onehot[np.arange(inst.n_ms), assign] = 1.0
        pulls = (onehot.T @ inst.E) > 0
        T = float(np.sum((pulls @ inst.layer_sizes) / inst.bandwidth))
        R = float(np.sum(inst.traffic * inst.hops.d[np.ix_(assign, assign)]))
        return self.c1 * T + self.c2 * R + float(self.lin[np.arange(inst.n_ms), assign].sum()) + self.const


def surrogate_value(model: VectorizedModel, ucfg: UtilityConfig, x_vec, d_vec) -> float:
    """``U(x, d) = c1 M d + 0.5 c2 x^T Q x`` (the utility without its constant)."""
    x_vec = np.asarray(x_vec, float)
    return float(ucfg.c1 * (model.M @ np.asarray(d_vec, float)) + ucfg.c2 * (x_vec @ model.W @ x_vec))


def _is_binary(v):
    return bool(np.all((v == 0) | (v == 1)))


def build_subproblem(model, split, cfg: ScaConfig, x_bar, d_bar, ucfg: UtilityConfig | None = None):
    inst = model.instance
    if ucfg is None:
        ucfg = normalization_bounds(inst, cfg.theta)
    x_bar = np.asarray(x_bar, float)
    d_bar = np.asarray(d_bar, float)
    if x_bar.shape != (model.x_len,) or d_bar.shape != (model.d_len,):
        raise InfeasibleReference("reference point has the wrong dimensions")

    reference = None
    if _is_binary(x_bar) and _is_binary(d_bar):
        assign = decode_x(inst, x_bar)
        dep = Deployment.from_assignment(inst, assign)
        if not np.allclose(model.Q_eq @ x_bar, model.b1) or not np.array_equal(encode_d(dep.pulls), d_bar):
            raise InfeasibleReference("reference x and d are inconsistent")
        report = check_feasibility(inst, dep)
        if not report.feasible:
            raise InfeasibleReference(f"reference violates {report.violations[0].constraint}")
        reference = assign
    else:
        if (
            (x_bar < -CAPACITY_TOL).any()
            or (x_bar > 1 + CAPACITY_TOL).any()
            or not np.allclose(model.Q_eq @ x_bar, model.b1)
            or not np.allclose(model.H @ x_bar, model.b2)
        ):
            raise InfeasibleReference("fractional reference leaves the assignment polytope")

    lam, c2 = split.lambda_q, ucfg.c2
    lin = -c2 * lam * x_bar.reshape(inst.n_ms, inst.n_servers)
    const = 0.5 * c2 * lam * (inst.n_ms + float(x_bar @ x_bar))
    return SubproblemSpec(
        model=model,
        split=split,
        c1=ucfg.c1,
        c2=c2,
        x_bar=x_bar,
        d_bar=d_bar,
        lin=lin,
        const=const,
        reference=reference,
        budget=cfg.subproblem_budget,
    )


def initial_feasible(instance: Instance, seed: int = 0, attempts: int = 64):
    """First-fit decreasing start point ``(assign, pulls)``.

    Microservices go in decreasing cpu demand onto the server with the most
    residual cpu that also has room for the missing layers.  If that fails,
    seeded random orders are tried.
    """
    inst = ensure_augmented(instance)
    real = [j for j in range(inst.n_ms) if j not in inst.pinned]
    order = sorted(real, key=lambda j: (-inst.cpu_demand[j], j))
    rng = np.random.default_rng(seed)
    tightest = None
    for attempt in range(attempts):
        state = PlacementState(inst)
        for j in order:
            servers = sorted(range(inst.n_servers), key=lambda n: (-state.residual_cpu(n), n))
            chosen = next((n for n in servers if state.fits(j, n)), None)
            if chosen is None:
                best = max(range(inst.n_servers), key=state.residual_cpu)
                tightest = (
                    f"microservice {inst.keys[j]} (cpu {inst.cpu_demand[j]:.3f} GHz, "
                    f"image {inst.image_sizes[j]:.1f} MB) fits nowhere; "
                    f"max residual cpu {state.residual_cpu(best):.3f} GHz"
                )
                break
            state.place(j, chosen)
        else:
            return state.assign.copy(), state.deployment().pulls.copy()
        order = list(rng.permutation(real))
    raise NoFeasiblePoint(f"no feasible start after {attempts} orders: {tightest}", tightest=tightest)


@dataclass
class ScaIterate:
    x: np.ndarray
    d: np.ndarray
    U: float
    step: float = 0.0
    stats: SubproblemStats | None = None

    def record(self, instance, r):
        out = {"iter": r, "U": self.U, "step": self.step}
        if _is_binary(self.x):
            out["assignment"] = decode_x(instance, self.x).tolist()
        else:
            out["x"] = self.x.tolist()
        out["d"] = self.d.astype(float).tolist()
        if self.stats is not None:
            out["subproblem"] = self.stats.as_dict()
        return out


@dataclass
class ScaTrace:
    iterates: list = field(default_factory=list)
    converged: bool = False
    final_gap: float = float("inf")
    lambda_q: float = 0.0
    final_U: float | None = None
    tie_break: str = "lexicographic (k, i, n)"
    start: str = "ffd"

    @property
    def U(self):
        return [it.U for it in self.iterates]

    @property
    def subproblem_stats(self):
        return [it.stats for it in self.iterates[1:]]

    @property
    def all_optimal(self):
        return all(s.optimal for s in self.subproblem_stats)

    @property
    def iterations(self):
        return len(self.iterates) - 1

    def records(self, instance):
        return [it.record(instance, r) for r, it in enumerate(self.iterates)]

    def to_jsonl(self, instance, path):
        with open(path, "w") as fh:
            for rec in self.records(instance):
                fh.write(json.dumps(rec) + "\n")


def _warm_start(inst, model, split, cfg, ucfg):
    """Pick the start point; returns ``(name, assign)``.

    ``ffd`` is the first-fit point alone.  ``portfolio`` also tries the greedy
    strategy at the same ``theta`` and the exact pull-delay optimum, and keeps
    whichever has the lowest utility (earlier candidates win ties).  A greedy
    that finds no placement is dropped from the portfolio.  The
    majorizer charges every relocated microservice roughly ``c2 * lambda``, so
    the loop rarely moves far from where it starts.
    """
    from .greedy import gds

    assign, _ = initial_feasible(inst, cfg.seed)
    candidates = [("ffd", assign)]
    if cfg.warm_start == "portfolio":
        try:
            candidates.append(("gds", gds(inst, cfg.theta).assignment(inst)))
        except NoFeasiblePlacement:
            pass  # the greedy can dead-end on tight instances
        if ucfg.c1 > 0:
            x0, d0 = encode(inst, assign)
            spec = build_subproblem(model, split, cfg, x0, d0, ucfg.with_theta(1.0))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BudgetExhausted)
                candidates.append(("pull-delay", solve_subproblem(spec).assign))
    best = min(candidates, key=lambda c: surrogate_value(model, ucfg, *encode(inst, c[1])))
    return best


def sca_solve(instance: Instance, cfg: ScaConfig = ScaConfig(), ucfg: UtilityConfig | None = None):
    """Run the SCA loop and return ``(Deployment, ScaTrace)``.

    With ``alpha == 1`` every iterate is a binary placement and the step norm
    is the Hamming distance between consecutive iterates.  With a fractional
    ``alpha`` the iterates live in the relaxation and a last exact subproblem
    solve at the final point yields the returned placement.
    """
    inst = ensure_augmented(instance)
    model = vectorize(inst)
    if ucfg is None:
        ucfg = normalization_bounds(inst, cfg.theta)
    split = split_matrix(model.Q)
    start, assign0 = _warm_start(inst, model, split, cfg, ucfg)
    x, d = encode(inst, assign0)

    trace = ScaTrace(lambda_q=split.lambda_q, start=start)
    trace.iterates.append(ScaIterate(x, d, surrogate_value(model, ucfg, x, d)))
    for _ in range(cfg.max_iters):
        spec = build_subproblem(model, split, cfg, x, d, ucfg)
        res = solve_subproblem(spec)
        x_new = x + cfg.alpha * (res.z_x - x)
        d_new = d + cfg.alpha * (res.z_d - d)
        step = float(np.abs(x_new - x).sum() + np.abs(d_new - d).sum())
        x, d = x_new, d_new
        trace.iterates.append(ScaIterate(x, d, surrogate_value(model, ucfg, x, d), step, res.stats))
        trace.final_gap = step
        if step <= cfg.epsilon:
            trace.converged = True
            break

    if _is_binary(x):
        assign = decode_x(inst, x)
    else:
        assign = solve_subproblem(build_subproblem(model, split, cfg, x, d, ucfg)).assign
    dep = Deployment.from_assignment(inst, assign)
    xf, df = encode_x(inst, assign), encode_d(dep.pulls)
    trace.final_U = surrogate_value(model, ucfg, xf, df)
    return dep, trace
