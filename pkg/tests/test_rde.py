import math

import numpy as np
import pytest

from data import get_driver
from fields import ConstantField, LinearField, SinField
from rde import InconsistencyError, ode_oracle, remainder, remainder_scaling_report, solve_step2
from rough_paths import ParameterError, brownian_sample_lift
from scheme_utils import fitted_order, stride_subgrid
from variation import control_from_matrix


def test_constant_field_is_additive():
    x, rp = brownian_sample_lift(0, 128, 1, 1.0, 2.5)
    sol = solve_step2(ConstantField(), rp, [0.2])
    np.testing.assert_allclose(sol.y[:, 0], 0.2 + x.values[:, 0], atol=1e-13)
    for s, t in [(0, 128), (10, 90), (5, 6)]:
        assert np.all(np.abs(sol.remainder(rp.grid[s], rp.grid[t])) <= 1e-13)


def test_exponential_step_map():
    _, rp = get_driver("line:1", 2.5, n=4)
    sol = solve_step2(LinearField(), rp, [1.0])
    h = 0.25
    assert sol.y[-1, 0] == pytest.approx((1 + h + h * h / 2) ** 4, rel=1e-14)


def test_exponential_convergence_order():
    hs, errors = [], []
    for k in range(4, 9):
        _, rp = get_driver("line:1", 2.5, n=2 ** k)
        hs.append(2.0 ** -k)
        errors.append(abs(solve_step2(LinearField(), rp, [1.0]).y[-1, 0] - math.e))
    assert fitted_order(hs, errors) >= 1.9


def test_equilibrium():
    _, rp = brownian_sample_lift(2, 64, 1, 1.0, 2.5)
    assert np.all(solve_step2(LinearField(), rp, [0.0]).y == 0.0)


def test_remainder_vanishes_on_single_steps():
    _, rp = brownian_sample_lift(3, 64, 1, 1.0, 2.5)
    vf = SinField()
    sol = solve_step2(vf, rp, [0.5])
    for k in [0, 17, 63]:
        assert abs(remainder(sol, vf, rp, rp.grid[k], rp.grid[k + 1])[0]) <= 1e-15


def test_remainder_exponential_whole_interval():
    _, rp = get_driver("line:1", 2.5, n=256)
    sol = solve_step2(LinearField(), rp, [1.0])
    # y_T - (1 + X1 + X2) with X1 = 1, X2 = 1/2
    assert sol.remainder(0.0, 1.0)[0] == pytest.approx(math.e - 2.5, abs=1e-3)


def test_subgrid_and_restart_are_flow_maps():
    _, rp = brownian_sample_lift(4, 64, 2, 1.0, 2.5)
    vf = SinField(N=2, d=2)
    full = solve_step2(vf, rp, [0.1, -0.3])
    first = solve_step2(vf, rp, [0.1, -0.3], np.arange(0, 33))
    second = solve_step2(vf, rp, first.y[-1], np.arange(32, 65))
    assert np.array_equal(full.y[:33], first.y)
    assert np.array_equal(full.y[32:], second.y)

    coarse = solve_step2(vf, rp, [0.1, -0.3], stride_subgrid(len(rp), 8))
    assert len(coarse) == 9 and coarse.grid[-1] == 1.0


def test_leaving_the_box_truncates():
    _, rp = get_driver("line:1", 2.5, n=100)
    with pytest.warns(RuntimeWarning):
        sol = solve_step2(LinearField(box=(-2.0, 2.0)), rp, [1.0])
    assert sol.truncated
    assert "working box" in sol.diagnostic
    assert np.all(sol.y <= 2.0)
    assert sol.grid[-1] < 1.0


def test_dimension_mismatch():
    _, rp = brownian_sample_lift(0, 16, 2, 1.0, 2.5)
    with pytest.raises(ParameterError):
        solve_step2(SinField(d=1), rp, [0.0])
    with pytest.raises(ParameterError):
        solve_step2(SinField(d=2), rp, [0.0, 1.0])


def test_scaling_report_constant_field():
    _, rp = brownian_sample_lift(5, 256, 1, 1.0, 2.5)
    sol = solve_step2(ConstantField(), rp, [0.0])
    report = remainder_scaling_report(sol, ConstantField(), rp)
    assert [r.depth for r in report] == [1, 2, 3, 4, 5, 6]
    assert all(r.sup_ratio <= 1e-10 for r in report)
    assert [r.n_pairs for r in report] == [2, 4, 8, 16, 32, 64]


def test_scaling_report_brownian_sin_is_bounded():
    _, rp = brownian_sample_lift(1234, 2 ** 10, 1, 1.0, 2.5)
    vf = SinField()
    sol = solve_step2(vf, rp, [0.5])
    ratios = np.array([r.sup_ratio for r in remainder_scaling_report(sol, vf, rp)])
    assert np.all(np.isfinite(ratios)) and np.all(ratios > 0)


def test_scaling_report_flags_vanishing_control():
    _, rp = get_driver("line:1", 2.5, n=64)
    sol = solve_step2(LinearField(), rp, [1.0])
    zero = control_from_matrix(rp.grid, np.zeros((65, 65)))
    with pytest.raises(InconsistencyError):
        remainder_scaling_report(sol, LinearField(), rp, omega=zero)


def test_ode_oracle():
    x, _ = get_driver("smooth:sin", 2.5, n=100)
    y = ode_oracle(ConstantField(), x, [1.0])
    np.testing.assert_allclose(y[:, 0], 1.0 + x.values[:, 0], atol=1e-12)

    x, _ = get_driver("line:1", 2.5, n=1000)
    y = ode_oracle(LinearField(), x, [1.0])
    assert y[-1, 0] == pytest.approx(math.e, abs=1e-10)


def test_ode_oracle_is_self_consistent():
    x, _ = get_driver("smooth:sin", 2.5, n=512)
    coarse = ode_oracle(SinField(), x, [0.5], substeps=4)
    fine = ode_oracle(SinField(), x, [0.5], substeps=8)
    assert np.max(np.abs(coarse - fine)) <= 1e-9
