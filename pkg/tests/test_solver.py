import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fitted_fvm.assembly import EXP_X_MINUS_T, TridiagonalSystem, assemble_step, stiffness
from fitted_fvm.experiments import test_problem
from fitted_fvm.flux import face_data
from fitted_fvm.mesh import ConfigurationError, uniform
from fitted_fvm.model import LinearInX, MarketModel, initial_condition
from fitted_fvm.solver import (
    PositivityError,
    SingularSystemError,
    Solution,
    SolverConfig,
    SolverError,
    interpolate,
    m_matrix_check,
    max_stable_dt,
    solve_evolution,
    thomas_solve,
)
from solver_helpers import solve_dense

# -- tridiagonal solve ----------------------------------------------------------


def test_identity_system():
    F = np.array([1.0, -2.0, 3.0, 0.5])
    sys = TridiagonalSystem(np.zeros(3), np.ones(4), np.zeros(3), F)
    np.testing.assert_array_equal(thomas_solve(sys), F)


def test_two_by_two():
    sys = TridiagonalSystem(np.array([1.0]), np.array([2.0, 2.0]), np.array([1.0]), np.array([3.0, 3.0]))
    np.testing.assert_allclose(thomas_solve(sys), [1.0, 1.0], rtol=1e-15)


@given(st.integers(0, 10_000))
def test_random_dominant_system_matches_dense(seed):
    rng = np.random.default_rng(seed)
    n = 50
    sub, sup = rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n - 1)
    diag = 2.5 + rng.random(n)
    sys = TridiagonalSystem(sub, diag, sup, rng.uniform(-1, 1, n))
    u = thomas_solve(sys)
    np.testing.assert_allclose(u, solve_dense(sys), rtol=1e-12, atol=1e-12)
    bound = 1e-12 * (np.max(np.abs(sys.rhs)) + np.max(np.abs(u)) * np.max(np.abs(sys.to_dense())))
    assert np.max(np.abs(sys.residual(u))) <= bound


def test_singular_system_reports_row():
    sys = TridiagonalSystem(np.zeros(3), np.array([1.0, 1.0, 0.0, 1.0]), np.zeros(3), np.ones(4))
    with pytest.raises(SingularSystemError) as err:
        thomas_solve(sys)
    assert err.value.row == 2


# -- M-matrix diagnostic --------------------------------------------------------


def _step(tp, N, dt, t=0.0):
    prob = test_problem(tp)
    m = uniform(N)
    u0 = initial_condition(prob.payoff, prob.model, m.nodes)
    return assemble_step(u0, t, dt, m, prob.model, 0.5)


def test_m_matrix_passes_for_small_dt():
    assert m_matrix_check(_step(1, 80, 1e-4)).passed


def test_m_matrix_fails_for_huge_dt():
    rep = m_matrix_check(_step(2, 80, 10.0))
    assert not rep.passed
    assert rep.row is not None and 2 <= rep.row <= 78
    assert rep.reason


def test_m_matrix_matrix_part_survives_huge_dt():
    # only the load-vector condition is lost at large dt for TP1
    assert m_matrix_check(_step(1, 80, 10.0), check_rhs=False).passed


def test_zero_convection_offdiagonals_negative():
    mod = MarketModel(0.3, 0.09, LinearInX(0.18), 400.0)
    m = uniform(40)
    lo, mid, hi = stiffness(0.0, m, mod)
    assert np.all(lo[2:-1] < 0) and np.all(hi[1:-2] < 0)


def test_m_matrix_reports_positive_offdiagonal():
    n = 8
    sys = TridiagonalSystem(np.full(n - 1, -1.0), np.full(n, 3.0), np.full(n - 1, -1.0), np.ones(n))
    assert m_matrix_check(sys).passed
    sup = sys.sup.copy()
    sup[4] = 0.5
    rep = m_matrix_check(TridiagonalSystem(sys.sub, sys.diag, sup, sys.rhs))
    assert not rep.passed and rep.row == 4


# -- configuration ----------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [dict(theta=1.2), dict(T=0.0), dict(dt=0.0), dict(dt=[0.5, 0.4]), dict(dt=[]), dict(record_every=0)],
)
def test_solver_config_errors(kwargs):
    with pytest.raises(ConfigurationError):
        SolverConfig(**kwargs)


def test_schedule_rounds_to_equal_steps():
    steps = SolverConfig(T=0.1, dt=0.03).schedule()
    assert len(steps) == 4 and steps.sum() == pytest.approx(0.1, abs=1e-15)
    assert len(SolverConfig(T=1.0, dt=1e-3).schedule()) == 1000
    np.testing.assert_array_equal(SolverConfig(T=1.0, dt=[0.25, 0.75]).schedule(), [0.25, 0.75])


# -- time marching ------------------------------------------------------------------


def test_zero_data_stays_zero(tp1):
    m = uniform(40)
    sol = solve_evolution(SolverConfig(T=0.5, dt=0.01), m, tp1.model, np.zeros(41))
    assert np.all(sol.values == 0.0)


def test_first_slice_is_initial_data(tp1):
    m = uniform(40)
    sol = solve_evolution(SolverConfig(T=0.1, dt=0.01, record_every=2), m, tp1.model, tp1.payoff)
    np.testing.assert_array_equal(sol.values[0], initial_condition(tp1.payoff, tp1.model, m.nodes))
    np.testing.assert_allclose(sol.times, [0, 0.02, 0.04, 0.06, 0.08, 0.1], atol=1e-15)


def test_tp1_solution_nonnegative_and_monotone(tp1):
    m = uniform(320)
    cfg = SolverConfig(T=1.0, dt=1e-4, check_positivity=True)
    sol = solve_evolution(cfg, m, tp1.model, tp1.payoff)
    assert sol.diagnostics.positive and sol.diagnostics.min_value >= -1e-12
    assert np.all(np.diff(sol.final) >= -1e-14)
    S, V = sol.prices()
    assert S.size == 320 and np.all(V >= -1e-10)


def test_mms_error_matches_table_cell(tp1):
    m = uniform(160)
    f = EXP_X_MINUS_T.forcing(tp1.model)
    sol = solve_evolution(SolverConfig(T=1.0, dt=1e-3), m, tp1.model, EXP_X_MINUS_T.u(m.nodes, 0.0), f)
    err = np.max(np.abs(sol.final - EXP_X_MINUS_T.u(m.nodes, 1.0)))
    assert err == pytest.approx(1.729e-3, rel=0.01)


def test_linearity():
    prob = test_problem(3)
    m = uniform(40)
    rng = np.random.default_rng(4)
    u, v = rng.random(41), rng.random(41)
    cfg = SolverConfig(T=0.2, dt=1e-2)
    a, b = 0.7, -1.3
    lhs = solve_evolution(cfg, m, prob.model, a * u + b * v).final
    rhs = a * solve_evolution(cfg, m, prob.model, u).final + b * solve_evolution(cfg, m, prob.model, v).final
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_strict_m_matrix_failure_raises():
    prob = test_problem(2)
    cfg = SolverConfig(T=10.0, dt=10.0, check_m_matrix=True, strict=True)
    with pytest.raises(SolverError) as err:
        solve_evolution(cfg, uniform(80), prob.model, prob.payoff)
    assert err.value.step == 0 and "diagnostics" in err.value.snapshot


def test_nonstrict_m_matrix_failure_is_recorded():
    prob = test_problem(2)
    cfg = SolverConfig(T=10.0, dt=10.0, check_m_matrix=True)
    sol = solve_evolution(cfg, uniform(80), prob.model, prob.payoff)
    assert sol.diagnostics.m_matrix_failures == 1
    step, rep = sol.diagnostics.first_m_matrix_failure
    assert step == 0 and not rep.passed


def test_strict_positivity_raises():
    m = uniform(20)
    cfg = SolverConfig(T=0.1, dt=0.1, check_positivity=True, strict=True)
    u0 = np.zeros(21)
    u0[10] = -1.0
    with pytest.raises(PositivityError):
        solve_evolution(cfg, m, test_problem(1).model, u0)


def test_bad_initial_vector(tp1):
    with pytest.raises(ConfigurationError):
        solve_evolution(SolverConfig(), uniform(10), tp1.model, np.ones(5))


# -- boundary rows -------------------------------------------------------------------


def test_left_node_stays_exactly_zero(tp1):
    m = uniform(160)
    assert face_data(0.0, m, tp1.model).alpha[0] < 0
    sol = solve_evolution(SolverConfig(T=1.0, dt=1e-3, record_every=1), m, tp1.model, tp1.payoff)
    assert np.all(sol.values[:, 0] == 0.0)


def _discrete_rate(m, model):
    # row N decouples: l_N u' = -(q_{N-1/2} b_{N-1/2} + l_N c_N) u
    lo, mid, hi = stiffness(0.0, m, model)
    assert lo[-1] == 0.0
    return mid[-1] / m.volumes[-1]


def test_right_node_follows_scalar_recursion(tp1):
    m = uniform(80)
    dt = 1e-2
    sol = solve_evolution(SolverConfig(T=1.0, dt=dt, record_every=1), m, tp1.model, tp1.payoff)
    lam = _discrete_rate(m, tp1.model)
    g = (1 - 0.5 * dt * lam) / (1 + 0.5 * dt * lam)
    expect = g ** np.arange(sol.times.size)
    np.testing.assert_allclose(sol.values[:, -1], expect, rtol=1e-13)


@pytest.mark.parametrize("dt", [1e-2, 1e-3])
def test_right_node_time_error_is_second_order(tp1, dt):
    # against the exact decay at the discrete boundary rate
    m = uniform(320)
    sol = solve_evolution(SolverConfig(T=1.0, dt=dt), m, tp1.model, tp1.payoff)
    exact = np.exp(-_discrete_rate(m, tp1.model))
    assert abs(sol.final[-1] - exact) / exact <= 5 * dt**2


def test_right_boundary_rate_is_first_order_in_h(tp1):
    d1 = float(tp1.model.d(1.0, 0.0))
    gaps = [abs(_discrete_rate(uniform(N), tp1.model) - d1) for N in (80, 160, 320, 640)]
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    np.testing.assert_allclose(ratios, 2.0, rtol=0.01)


# -- interpolation and threshold ---------------------------------------------------


def test_interpolate(tp1):
    m = uniform(40)
    sol = solve_evolution(SolverConfig(T=0.5, dt=0.01, record_every=10), m, tp1.model, tp1.payoff)
    u = sol.values[-1]
    np.testing.assert_allclose(interpolate(sol, 0.5, m.nodes), u, rtol=0, atol=1e-15)
    for i in (5, 20, 33):
        mid = interpolate(sol, 0.5, m.midpoints[i])
        lo, hi = sorted((u[i], u[i + 1]))
        assert lo <= mid <= hi
    with pytest.raises(LookupError):
        interpolate(sol, 0.123, 0.5)


def test_interpolate_constant(tp1):
    m = uniform(20)
    const = Solution(m, tp1.model, np.array([0.0]), np.full((1, 21), 3.0))
    np.testing.assert_allclose(interpolate(const, 0.0, np.linspace(0, 1, 37)), 3.0, atol=1e-13)


def test_max_stable_dt():
    prob = test_problem(2)
    m = uniform(80)
    u0 = initial_condition(prob.payoff, prob.model, m.nodes)
    dt_max = max_stable_dt(m, prob.model, u0)
    assert 0.05 < dt_max < 0.5
    assert m_matrix_check(assemble_step(u0, 0.0, 0.99 * dt_max, m, prob.model)).passed
    assert not m_matrix_check(assemble_step(u0, 0.0, 1.01 * dt_max, m, prob.model)).passed
    tp1 = test_problem(1)
    u1 = initial_condition(tp1.payoff, tp1.model, m.nodes)
    assert max_stable_dt(m, tp1.model, u1) == 10.0


def test_max_stable_dt_shrinks_with_h():
    prob = test_problem(2)
    vals = []
    for N in (40, 80, 160):
        m = uniform(N)
        vals.append(max_stable_dt(m, prob.model, initial_condition(prob.payoff, prob.model, m.nodes)))
    assert vals[0] > vals[1] > vals[2]

