import warnings

import numpy as np
import pytest

from layerchain.errors import DegenerateBounds, DimensionMismatch
from layerchain.model import Deployment, ensure_augmented
from layerchain.objective import (
    UtilityConfig,
    communication_overhead,
    evaluate,
    normalization_bounds,
    pull_delay,
    utility,
)
from layerchain.sca import initial_feasible
from layerchain.vectorize import encode, vectorize
from oracles import all_assignments, brute_R, brute_T, make_instance, table3, tiny


def single_server(total_mb, bw=120.0):
    return ensure_augmented(make_instance([(4.0, 10_000.0, bw)], [total_mb], [(0, 0.0, [(0.1, {0})], {})]))


@pytest.mark.parametrize("mb, seconds", [(1617.48, 13.479), (2283.0, 19.025), (1758.0, 14.65)])
def test_pull_delay_arithmetic(mb, seconds):
    inst = single_server(mb)
    assert pull_delay(inst, np.ones((1, 1))) == pytest.approx(seconds, abs=1e-3)


def test_pull_delay_zero_and_shapes():
    inst = table3(0)
    assert pull_delay(inst, np.zeros((inst.n_servers, inst.n_layers))) == 0.0
    with pytest.raises(DimensionMismatch):
        pull_delay(inst, np.zeros((1, 1)))
    m = vectorize(inst)
    with pytest.raises(DimensionMismatch):
        pull_delay(m, np.zeros(3))


def test_overhead_single_edge():
    inst = ensure_augmented(make_instance(
        [(2.0, 1000.0, 100.0)] * 2, [10.0], [(0, 100.0, [(0.1, {0})], {})]))
    assert communication_overhead(inst, [0, 1]) == 100.0
    assert communication_overhead(inst, [0, 0]) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_dense_and_vector_agree(seed):
    inst = table3(seed)
    m = vectorize(inst)
    rng = np.random.default_rng(seed)
    for _ in range(10):
        assign = rng.integers(0, inst.n_servers, inst.n_ms)
        x, d = encode(inst, assign)
        dep = Deployment.from_assignment(inst, assign)
        assert communication_overhead(inst, dep.placements) == pytest.approx(m.overhead(x), rel=1e-9)
        assert pull_delay(inst, dep.pulls) == pytest.approx(pull_delay(m, d), rel=1e-9)
        assert pull_delay(inst, dep.pulls) == pytest.approx(brute_T(inst, assign), rel=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_bounds_bracket_every_feasible_deployment(seed):
    inst = tiny(seed)
    cfg = normalization_bounds(inst, 0.5)
    for assign in all_assignments(inst):
        T, R = brute_T(inst, assign), brute_R(inst, assign)
        assert cfg.t_min - 1e-9 <= T <= cfg.t_max + 1e-9
        assert cfg.r_min - 1e-9 <= R <= cfg.r_max + 1e-9
        F = utility(cfg, T, R)
        assert -1e-12 <= F <= 1 + 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_bounds_on_random_table3(seed):
    inst = table3(seed)
    cfg = normalization_bounds(inst)
    rng = np.random.default_rng(seed)
    for _ in range(100):
        assign = rng.integers(0, inst.n_servers, inst.n_ms)
        for j, s in inst.pinned.items():
            assign[j] = s
        T, R = brute_T(inst, assign), brute_R(inst, assign)
        assert cfg.t_min <= T + 1e-9 and T <= cfg.t_max + 1e-9
        assert R <= cfg.r_max + 1e-9


def test_degenerate_bounds_warn():
    inst = single_server(100.0)
    with pytest.warns(DegenerateBounds):
        cfg = normalization_bounds(inst)
    assert cfg.t_span == 1.0


def test_r_min_attained_when_colocated():
    inst = ensure_augmented(make_instance(
        [(4.0, 10_000.0, 100.0)] * 3, [10.0, 20.0],
        [(1, 300.0, [(0.2, {0}), (0.3, {1})], {(1, 2): 500.0})]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateBounds)
        cfg = normalization_bounds(inst)
    dep = Deployment.from_assignment(inst, [1, 1, 1])
    assert evaluate(inst, dep, cfg)[2] == cfg.r_min == 0.0


class TestUtility:
    cfg = UtilityConfig(0.3, 10.0, 30.0, 0.0, 1000.0)

    def test_minimum_is_zero(self):
        assert utility(self.cfg, 10.0, 0.0) == 0.0

    def test_formula(self):
        expected = 0.3 * (20.0 - 10.0) / 20.0 + 0.7 * 500.0 / 1000.0
        assert utility(self.cfg, 20.0, 500.0) == pytest.approx(expected)

    def test_without_const(self):
        cfg = UtilityConfig(0.3, 10.0, 30.0, 0.0, 1000.0, include_const=False)
        assert utility(cfg, 20.0, 500.0) == pytest.approx(cfg.c1 * 20.0 + cfg.c2 * 500.0)

    def test_endpoints(self):
        c1 = self.cfg.with_theta(1.0)
        assert utility(c1, 20.0, 0.0) == utility(c1, 20.0, 999.0)
        c0 = self.cfg.with_theta(0.0)
        assert utility(c0, 11.0, 5.0) == utility(c0, 29.0, 5.0)

    def test_monotone(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            T, R = rng.uniform(10, 30), rng.uniform(0, 1000)
            assert utility(self.cfg, T + 1.0, R) >= utility(self.cfg, T, R)
            assert utility(self.cfg, T, R + 1.0) >= utility(self.cfg, T, R)

    def test_rejects_bad_theta(self):
        with pytest.raises(ValueError):
            UtilityConfig(1.5, 0.0, 1.0, 0.0, 1.0)


def test_evaluate_matches_oracles():
    inst = table3(7)
    cfg = normalization_bounds(inst, 0.4)
    assign, _ = initial_feasible(inst)
    dep = Deployment.from_assignment(inst, assign)
    F, T, R = evaluate(inst, dep, cfg)
    assert T == pytest.approx(brute_T(inst, assign))
    assert R == pytest.approx(brute_R(inst, assign))
    assert F == pytest.approx(utility(cfg, T, R))
