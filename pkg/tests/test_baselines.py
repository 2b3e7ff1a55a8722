import math

import numpy as np
import pytest

import wavecontrol as wc

from conftest import make_problem


def test_picard_linear_fixed_point_in_one_iteration(small_problem):
    g = wc.builtin("linear", b=0.4)
    res = wc.picard_solve(small_problem, g)
    # the first map application lands on the fixed point: the controlled
    # pair for the constant potential solves the equation exactly
    assert res.status == "converged"
    assert len(res.records) - 1 == 1
    assert res.records[-1].E <= 1e-18


def test_picard_contracts_for_weak_nonlinearity(small_problem):
    g = wc.builtin("lipschitz_sat", kappa=0.2)
    res = wc.picard_solve(small_problem, g)
    assert res.status == "converged"
    deltas = [r.step_delta for r in res.records if math.isfinite(r.step_delta)]
    # measured contraction: consecutive increments shrink
    assert all(b < a for a, b in zip(deltas, deltas[1:]))


def test_variant_zero_g_is_linear_initialization(small_problem):
    g = wc.builtin("zero")
    res = wc.variant_solve(small_problem, g)
    assert res.status == "converged"
    assert len(res.records) == 1   # E_0 already at floor


def test_variant_linear_one_step_exactness(small_problem):
    g = wc.builtin("linear", b=0.4)
    res = wc.variant_solve(small_problem, g)
    assert res.status == "converged"
    assert len(res.records) - 1 == 1
    assert res.records[-1].E <= 1e-18


def test_variant_runs_on_saturated_nonlinearity(small_problem):
    g = wc.builtin("lipschitz_sat", kappa=0.5)
    res = wc.variant_solve(small_problem, g, wc.FixedPointConfig(max_outer=30))
    assert res.status == "converged"
    for rec in res.records:
        assert math.isfinite(rec.E) and math.isfinite(rec.y_linf_L1)


def test_newton_equals_ls_under_unit_steps(small_problem):
    g = wc.builtin("linear", b=0.3)
    newton = wc.newton_classic_solve(small_problem, g)
    ls = wc.ls_solve(small_problem, g)
    assert newton.status == ls.status == "converged"
    assert [r.E for r in newton.records] == [r.E for r in ls.records]
    assert [r.lam for r in newton.records][:-1] == [r.lam for r in ls.records][:-1]


def test_newton_diverges_where_damped_converges():
    # large-data saturated cubic: unit steps overshoot and blow E up by
    # orders of magnitude while the damped iteration converges
    problem = make_problem(nx=100, nt=300, amplitude=10.0)
    g = wc.builtin("cubic_sat", R=50.0)
    newton = wc.newton_classic_solve(problem, g, wc.LSConfig(max_outer=8))
    assert newton.status in ("cap_reached", "diverged", "inner_failure")
    assert max(r.E for r in newton.records) > 100 * newton.records[0].E
    damped = wc.ls_solve(problem, g, wc.LSConfig(max_outer=20))
    assert damped.status == "converged"


def test_newton_quadratic_on_small_data():
    problem = make_problem(nx=100, nt=300, amplitude=2.0)
    g = wc.builtin("cubic_sat", R=50.0)
    res = wc.newton_classic_solve(problem, g)
    assert res.status == "converged"
    est = wc.estimate_order(res.records)
    assert est.order >= 1.7


def test_contraction_ratio_zero_for_constant_maps(small_problem):
    grid = small_problem.grid
    (x,) = grid.meshgrid()
    base = np.sin(np.pi * x)[None, :] * np.ones((grid.nt + 1, 1))
    xi1 = wc.SpaceTimeField(grid, base)
    xi2 = wc.SpaceTimeField(grid, base + 0.05)
    for g in (wc.builtin("zero"), wc.builtin("linear", b=0.5)):
        assert wc.contraction_ratio(small_problem, g, xi1, xi2) <= 1e-9
    with pytest.raises(ValueError):
        wc.contraction_ratio(small_problem, wc.builtin("zero"), xi1, xi1)


def test_contraction_ratio_scales_with_kappa():
    problem = make_problem(nx=60, nt=180)
    grid = problem.grid
    (x,) = grid.meshgrid()
    base = np.sin(np.pi * x)[None, :] * np.ones((grid.nt + 1, 1))
    xi1 = wc.SpaceTimeField(grid, base)
    xi2 = wc.SpaceTimeField(grid, 1.3 * base)
    ratios = {}
    for kappa in (0.1, 0.2, 0.4):
        g = wc.builtin("lipschitz_sat", kappa=kappa)
        ratios[kappa] = wc.contraction_ratio(problem, g, xi1, xi2)
    r1 = ratios[0.2] / ratios[0.1]
    r2 = ratios[0.4] / ratios[0.2]
    assert 2 * 0.7 <= r1 <= 2 * 1.3
    assert 2 * 0.7 <= r2 <= 2 * 1.3
