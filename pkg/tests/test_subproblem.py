import numpy as np
import pytest

from layerchain.errors import BudgetExhausted, Infeasible
from layerchain.objective import normalization_bounds
from layerchain.sca import ScaConfig, SubproblemSpec, build_subproblem, initial_feasible, split_matrix
from layerchain.subproblem import _Search, solve_subproblem
from layerchain.vectorize import encode, vectorize
from layerchain.model import ensure_augmented
from oracles import all_assignments, brute_feasible, make_instance, tiny


def spec_at(inst, assign, theta=0.5, budget=2000):
    model = vectorize(inst)
    split = split_matrix(model.Q)
    x, d = encode(inst, assign)
    return build_subproblem(model, split, ScaConfig(theta=theta, subproblem_budget=budget), x, d)


def enumerate_min(spec):
    """Minimum of the matrix-form objective over every feasible assignment."""
    inst = spec.instance
    best = np.inf
    for assign in all_assignments(inst):
        best = min(best, spec.objective(*encode(inst, assign)))
    return best


def close(a, b):
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


@pytest.mark.parametrize("seed", range(30))
@pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
def test_matches_enumeration(seed, theta):
    inst = tiny(seed)
    assign0, _ = initial_feasible(inst)
    spec = spec_at(inst, assign0, theta)
    res = solve_subproblem(spec)
    assert res.stats.optimal
    assert close(res.value, enumerate_min(spec))
    # the returned point is feasible and its matrix-form value is the reported one
    assert brute_feasible(inst, res.assign)
    assert close(spec.objective(res.z_x, res.z_d), res.value)


def test_binary_reduction_equals_matrix_form():
    inst = tiny(3)
    assign0, _ = initial_feasible(inst)
    spec = spec_at(inst, assign0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        assign = rng.integers(0, inst.n_servers, inst.n_ms)
        assert close(spec.value(assign), spec.objective(*encode(inst, assign)))


def test_three_servers_six_microservices_ilp():
    inst = ensure_augmented(make_instance(
        [(2.0, 3000.0, 120.0), (2.0, 2500.0, 180.0), (1.5, 4000.0, 150.0)],
        [400.0, 700.0, 250.0, 900.0, 120.0],
        [
            (0, 300.0, [(0.5, {0, 1}), (0.4, {1, 2}), (0.6, {3})], {(1, 2): 800.0, (2, 3): 400.0}),
            (2, 900.0, [(0.3, {0}), (0.7, {3, 4}), (0.2, {2})], {(1, 2): 1200.0, (1, 3): 500.0}),
        ],
    ))
    assign0, _ = initial_feasible(inst)
    spec = spec_at(inst, assign0, theta=1.0)
    assert spec.c2 == 0.0 and not spec.lin.any()
    res = solve_subproblem(spec)
    assert res.stats.optimal and close(res.value, enumerate_min(spec))


@pytest.mark.filterwarnings("ignore::layerchain.errors.DegenerateBounds")
def test_forced_solution_prunes():
    # only server 1 can host the big service; the small one must then go to 0
    inst = ensure_augmented(make_instance(
        [(0.6, 1000.0, 100.0), (1.0, 1000.0, 100.0)],
        [10.0, 20.0],
        [(0, 100.0, [(0.9, {0}), (0.5, {1})], {(1, 2): 100.0})],
    ))
    feasible = list(all_assignments(inst))
    assert len(feasible) == 1
    spec = spec_at(inst, feasible[0])
    res = solve_subproblem(spec)
    assert res.assign.tolist() == feasible[0].tolist()
    assert res.stats.nodes_pruned > 0


def test_budget_exhaustion_warns_and_keeps_incumbent():
    inst = tiny(5)
    assign0, _ = initial_feasible(inst)
    spec = spec_at(inst, assign0, budget=1)
    with pytest.warns(BudgetExhausted):
        res = solve_subproblem(spec)
    if not res.stats.optimal:
        assert res.stats.nodes_expanded == 1
    # never worse than the reference point
    assert res.value <= spec.value(assign0) + 1e-12


@pytest.mark.filterwarnings("ignore::layerchain.errors.DegenerateBounds")
def test_no_feasible_assignment():
    inst = ensure_augmented(make_instance(
        [(1.0, 1000.0, 100.0), (1.0, 1000.0, 100.0)],
        [10.0],
        [(0, 0.0, [(0.6, {0}), (0.6, {0}), (0.6, {0})], {})],
    ))
    model = vectorize(inst)
    split = split_matrix(model.Q)
    cfg = normalization_bounds(inst)
    spec = SubproblemSpec(model, split, cfg.c1, cfg.c2, np.zeros(model.x_len), np.zeros(model.d_len),
                          np.zeros((inst.n_ms, inst.n_servers)), 0.0, None, 100)
    with pytest.raises(Infeasible):
        solve_subproblem(spec)


LONGER_CHAINS = dict(n_apps=(2, 2), services_per_app=(3, 4), n_servers=(3, 3), cpu_cores=2, storage=(2.0, 4.0))


@pytest.mark.parametrize("seed, overrides", [(s, {}) for s in range(15)] + [(s, LONGER_CHAINS) for s in range(5)])
def test_bound_is_admissible(seed, overrides):
    """Node bounds never exceed the best completion of the partial assignment."""
    inst = tiny(seed, **overrides)
    assign0, _ = initial_feasible(inst)
    spec = spec_at(inst, assign0)
    search = _Search(spec)
    order = list(search.order)
    completions = {}
    for assign in all_assignments(inst):
        v = spec.value(assign)
        for depth in range(len(order) + 1):
            prefix = tuple(int(assign[j]) for j in order[:depth])
            completions[prefix] = min(completions.get(prefix, np.inf), v)
    for prefix, best in completions.items():
        st = search.rebuild(np.array(prefix, dtype=np.int16))
        assert search.bound(st, len(prefix)) + spec.const <= best + 1e-9


def test_deterministic():
    inst = tiny(11)
    assign0, _ = initial_feasible(inst)
    a = solve_subproblem(spec_at(inst, assign0))
    b = solve_subproblem(spec_at(inst, assign0))
    assert a.assign.tolist() == b.assign.tolist() and a.value == b.value
    assert a.stats.as_dict() == b.stats.as_dict()


def test_result_unpacks():
    inst = tiny(2)
    assign0, _ = initial_feasible(inst)
    z_x, z_d, stats = solve_subproblem(spec_at(inst, assign0))
    assert z_x.shape == (inst.n_ms * inst.n_servers,) and stats.optimal
