import json

import numpy as np
import pytest

from layerchain.errors import InfeasibleReference, NoFeasiblePoint, NonFiniteEntries
from layerchain.model import check_feasibility, ensure_augmented
from layerchain.objective import normalization_bounds
from layerchain.sca import (
    ScaConfig,
    build_subproblem,
    initial_feasible,
    sca_solve,
    spectral_radius,
    split_matrix,
    surrogate_value,
)
from layerchain.subproblem import solve_subproblem
from layerchain.vectorize import encode, vectorize
from oracles import all_assignments, brute_R, brute_T, make_instance, table3, tiny


class TestSplit:
    def test_zero(self):
        s = split_matrix(np.zeros((3, 3)))
        assert s.lambda_q == 0.0 and not s.P.any() and not s.N_mat.any()

    def test_two_by_two(self):
        s = split_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert s.lambda_q == pytest.approx(1.01, rel=1e-6)
        assert np.linalg.eigvalsh(s.P).min() >= 0
        assert np.allclose(s.P - s.N_mat, [[0, 1], [1, 0]])

    def test_non_finite(self):
        with pytest.raises(NonFiniteEntries):
            split_matrix(np.array([[0.0, np.nan], [np.nan, 0.0]]))

    def test_symmetrizes(self):
        s = split_matrix(np.array([[0.0, 2.0], [0.0, 0.0]]))
        assert np.allclose(s.P, s.P.T)

    @pytest.mark.parametrize("seed", range(10))
    def test_psd_on_generated(self, seed):
        Q = vectorize(table3(seed)).Q
        s = split_matrix(Q)
        assert s.lambda_q >= np.abs(np.linalg.eigvalsh(Q)).max()
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((1000, Q.shape[0]))
        assert (np.einsum("ij,jk,ik->i", X, s.P, X) >= -1e-8 * s.lambda_q).all()

    def test_power_iteration_close(self):
        Q = vectorize(table3(0)).Q
        assert spectral_radius(Q) == pytest.approx(np.abs(np.linalg.eigvalsh(Q)).max(), rel=1e-6)


def _setup(inst, theta=0.5):
    model = vectorize(inst)
    split = split_matrix(model.Q)
    ucfg = normalization_bounds(inst, theta)
    return model, split, ucfg


class TestSubproblemSpec:
    @pytest.mark.parametrize("seed", range(20))
    def test_majorization(self, seed):
        inst = table3(seed)
        model, split, ucfg = _setup(inst)
        cfg = ScaConfig()
        rng = np.random.default_rng(seed)
        xb, db = encode(inst, initial_feasible(inst)[0])
        spec = build_subproblem(model, split, cfg, xb, db, ucfg)
        assert spec.objective(xb, db) == pytest.approx(surrogate_value(model, ucfg, xb, db), abs=1e-9)
        for _ in range(10):
            assign = rng.integers(0, inst.n_servers, inst.n_ms)
            x, d = encode(inst, assign)
            assert spec.objective(x, d) >= surrogate_value(model, ucfg, x, d) - 1e-9

    def test_theta_one_is_linear(self):
        inst = table3(1)
        model, split, ucfg = _setup(inst, 1.0)
        xb, db = encode(inst, initial_feasible(inst)[0])
        spec = build_subproblem(model, split, ScaConfig(theta=1.0), xb, db, ucfg)
        assert spec.c2 == 0.0 and spec.const == 0.0

    def test_rejects_infeasible_reference(self):
        inst = tiny(0)
        model, split, ucfg = _setup(inst)
        assign = initial_feasible(inst)[0].copy()
        j0 = next(iter(inst.pinned))
        assign[j0] = (assign[j0] + 1) % inst.n_servers
        x, d = encode(inst, assign)
        with pytest.raises(InfeasibleReference):
            build_subproblem(model, split, ScaConfig(), x, d, ucfg)
        with pytest.raises(InfeasibleReference):
            build_subproblem(model, split, ScaConfig(), x[:-1], d, ucfg)
        good_x, good_d = encode(inst, initial_feasible(inst)[0])
        with pytest.raises(InfeasibleReference):
            build_subproblem(model, split, ScaConfig(), good_x, 1 - good_d, ucfg)


class TestInitialFeasible:
    def test_single_server(self):
        inst = ensure_augmented(make_instance(
            [(4.0, 5000.0, 100.0)], [10.0, 20.0], [(0, 0.0, [(0.1, {0}), (0.5, {1})], {(1, 2): 10.0})]))
        assign, pulls = initial_feasible(inst)
        assert assign.tolist() == [0, 0, 0] and pulls.tolist() == [[1, 1]]

    @pytest.mark.parametrize("seed", range(10))
    def test_generated_feasible(self, seed):
        inst = table3(seed)
        assign, pulls = initial_feasible(inst)
        from layerchain.model import Deployment

        dep = Deployment.from_assignment(inst, assign)
        assert check_feasibility(inst, dep).feasible and np.array_equal(dep.pulls, pulls)

    def test_packing_infeasible(self):
        inst = ensure_augmented(make_instance(
            [(1.0, 1000.0, 100.0), (1.0, 1000.0, 100.0)], [10.0],
            [(0, 0.0, [(0.6, {0}), (0.6, {0}), (0.6, {0})], {})]))
        with pytest.raises(NoFeasiblePoint) as err:
            initial_feasible(inst)
        assert err.value.tightest


SMALL = dict(n_apps=(2, 4), n_servers=(3, 6))


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("theta", [0.0, 0.3, 0.5, 1.0])
def test_descent_and_feasibility(seed, theta):
    inst = table3(seed, **SMALL)
    dep, trace = sca_solve(inst, ScaConfig(theta=theta))
    U = trace.U
    assert all(b <= a + 1e-9 for a, b in zip(U, U[1:]))
    assert trace.iterations <= 50
    assert check_feasibility(inst, dep).feasible
    assert trace.final_U == pytest.approx(U[-1])


@pytest.mark.parametrize("seed", range(15))
def test_theta_one_reaches_global_min_T(seed):
    inst = tiny(seed)
    dep, trace = sca_solve(inst, ScaConfig(theta=1.0))
    best = min(brute_T(inst, a) for a in all_assignments(inst))
    assert brute_T(inst, dep.assignment(inst)) == pytest.approx(best, rel=1e-12)
    assert trace.iterations <= 2 and trace.converged


@pytest.mark.parametrize("seed", range(8))
def test_converged_point_is_fixed(seed):
    inst = tiny(seed + 40)
    model, split, ucfg = _setup(inst)
    dep, trace = sca_solve(inst, ScaConfig())
    assert trace.converged
    x, d = encode(inst, dep.assignment(inst))
    res = solve_subproblem(build_subproblem(model, split, ScaConfig(), x, d, ucfg))
    assert res.value == pytest.approx(surrogate_value(model, ucfg, x, d), abs=1e-9)


def test_deterministic_traces():
    inst = table3(9, **SMALL)
    a = sca_solve(inst, ScaConfig())[1]
    b = sca_solve(inst, ScaConfig())[1]
    assert a.records(inst) == b.records(inst)


def test_portfolio_start_never_worse_than_ffd():
    for seed in range(3):
        inst = table3(seed, **SMALL)
        ffd = sca_solve(inst, ScaConfig(warm_start="ffd", max_iters=1))[1]
        port = sca_solve(inst, ScaConfig(max_iters=1))[1]
        assert ffd.start == "ffd"
        assert port.U[0] <= ffd.U[0] + 1e-12


def test_relaxed_step_returns_feasible_binary():
    inst = tiny(7)
    dep, trace = sca_solve(inst, ScaConfig(alpha=0.5, max_iters=5))
    assert check_feasibility(inst, dep).feasible
    assert trace.iterations >= 1


def test_trace_jsonl(tmp_path):
    inst = tiny(4)
    _, trace = sca_solve(inst, ScaConfig())
    path = tmp_path / "trace.jsonl"
    trace.to_jsonl(inst, path)
    lines = [json.loads(l) for l in path.read_text().splitlines()]
    assert len(lines) == len(trace.iterates)
    assert [l["U"] for l in lines] == trace.U
    assert "assignment" in lines[0] and "subproblem" in lines[-1]


def test_final_objective_matches_oracle():
    inst = tiny(13)
    _, _, ucfg = _setup(inst)
    dep, trace = sca_solve(inst, ScaConfig())
    a = dep.assignment(inst)
    assert trace.final_U == pytest.approx(ucfg.c1 * brute_T(inst, a) + ucfg.c2 * brute_R(inst, a))


def test_config_validation():
    with pytest.raises(ValueError):
        ScaConfig(alpha=0.0)
    with pytest.raises(ValueError):
        ScaConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        ScaConfig(max_iters=0)
    with pytest.raises(ValueError):
        ScaConfig(theta=2.0)
    with pytest.raises(ValueError):
        ScaConfig(warm_start="random")


def test_portfolio_survives_greedy_dead_end():
    from layerchain.errors import NoFeasiblePlacement
    from layerchain.greedy import gds

    inst = tiny(21)
    with pytest.raises(NoFeasiblePlacement):
        gds(inst, 0.5)
    dep, trace = sca_solve(inst, ScaConfig())
    assert check_feasibility(inst, dep).feasible and trace.start != "gds"
