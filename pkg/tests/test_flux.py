import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fitted_fvm.flux import (
    SMALL_Z,
    alpha,
    basis_eval,
    bernoulli,
    face_data,
    flux_interior,
    flux_left,
    flux_right,
    interpolate_nodal,
    log_phi_gaps,
)
from fitted_fvm.mesh import power_graded, uniform
from fitted_fvm.model import MarketModel
from oracles import interior_flux_rk4, left_flux_quad

# frozen oracle value: TP1 coefficients, N = 80, face at x = 0.50625, u = (0.2, 0.4)
TP1_FACE_40_FLUX = 0.198369192950206


def model_with_face_b(x_m, b_target, sigma=0.3, d=0.04, p_m=400.0):
    """Constant-coefficient model whose b equals ``b_target`` at x_m."""
    r = b_target + d - sigma**2 * (2 * x_m - 1)
    return MarketModel(sigma, r, d, p_m)


def phi(x):
    return x / (1 - x)


def test_bernoulli_values():
    assert bernoulli(0.0) == 1.0
    assert bernoulli(1.0) == pytest.approx(1 / (np.e - 1), rel=1e-15)
    assert bernoulli(-800.0) == pytest.approx(800.0, rel=1e-15)
    assert bernoulli(800.0) == 0.0


@given(st.floats(-50, 50))
def test_bernoulli_identity(z):
    # B(-z) = B(z) + z
    assert bernoulli(-z) == pytest.approx(bernoulli(z) + z, rel=1e-12, abs=1e-12)


def test_alpha_examples(tp1_model):
    m = uniform(80)
    x_m = m.midpoints[40]
    assert alpha(40, 0.0, m, model_with_face_b(x_m, 0.0)) == pytest.approx(0.0, abs=1e-14)
    # TP1: b = r - d - sigma^2 < 0 near x = 0
    assert alpha(0, 0.0, m, tp1_model) < 0


def test_alpha_at_half():
    # 1/3 and 2/3 bracket 0.5 so the middle face sits exactly at 0.5
    from fitted_fvm.mesh import Mesh

    m = Mesh(np.array([0.0, 0.1, 1 / 3, 2 / 3, 0.9, 1.0]))
    assert m.midpoints[2] == 0.5
    assert alpha(2, 0.0, m, MarketModel(0.3, 0.1, 0.04, 400.0)) == pytest.approx(0.06 / 0.045, rel=1e-14)


def test_alpha_index_errors(tp1_model):
    with pytest.raises(IndexError):
        alpha(80, 0.0, uniform(80), tp1_model)
    with pytest.raises(IndexError):
        flux_interior(0, 1.0, 1.0, 0.0, uniform(80), tp1_model)


def test_log_phi_gaps():
    m = uniform(10)
    g = log_phi_gaps(m)
    assert np.isnan(g[0]) and np.isnan(g[-1])
    ref = np.log(phi(m.nodes[2:-1]) / phi(m.nodes[1:-2]))
    np.testing.assert_allclose(g[1:-1], ref, rtol=1e-14)


@given(st.floats(0.05, 3.0), st.integers(1, 18))
def test_constant_state_carries_b(k, i):
    m = uniform(20)
    mod = MarketModel(0.3, 0.1, 0.04, 400.0)
    fd = face_data(0.0, m, mod)
    f = flux_interior(i, k, k, 0.0, m, mod) if 1 <= i <= 18 else None
    assert f.value == pytest.approx(fd.b[i] * k, rel=1e-12, abs=1e-15)
    assert f.coeff_lo + f.coeff_hi == pytest.approx(fd.b[i], rel=1e-12, abs=1e-15)


def test_zero_b_is_pure_log_diffusion():
    m = uniform(40)
    i = 13
    mod = model_with_face_b(m.midpoints[i], 0.0)
    f = flux_interior(i, 0.3, 0.8, 0.0, m, mod)
    delta = np.log(phi(m.nodes[i + 1]) / phi(m.nodes[i]))
    assert f.value == pytest.approx(0.045 * 0.5 / delta, rel=1e-12)


def test_generic_face_matches_frozen_oracle(tp1_model):
    m = uniform(80)
    f = flux_interior(40, 0.2, 0.4, 0.0, m, tp1_model)
    assert f.value == pytest.approx(TP1_FACE_40_FLUX, rel=1e-8)


def test_random_faces_match_bvp_oracle():
    rng = np.random.default_rng(2024)
    n = 50
    x0 = rng.uniform(0.02, 0.9, n)
    h = rng.uniform(1e-3, 0.05, n)
    sig = rng.uniform(0.05, 0.6, n)
    bval = rng.uniform(-0.5, 0.5, n)
    u0 = rng.uniform(0.0, 1.0, n)
    u1 = rng.uniform(0.0, 1.0, n)
    ours = np.empty(n)
    from fitted_fvm.mesh import Mesh

    for j in range(n):
        nodes = np.array([0.0, x0[j] / 2, x0[j], x0[j] + h[j], (x0[j] + h[j] + 1) / 2, 1.0])
        mesh = Mesh(nodes)
        mod = model_with_face_b(mesh.midpoints[2], bval[j], sigma=sig[j])
        ours[j] = flux_interior(2, u0[j], u1[j], 0.0, mesh, mod).value
    ref = interior_flux_rk4(x0, x0 + h, 0.5 * sig**2, bval, u0, u1)
    rel = np.abs(ours - ref) / np.maximum(np.abs(ref), 1e-12)
    assert rel.max() < 1e-8


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_alpha_continuity_at_zero(sign):
    m = uniform(40)
    i = 25
    A = 0.045
    u_i, u_ip1 = 0.35, 0.6
    mod = model_with_face_b(m.midpoints[i], sign * 1e-9 * A)
    fd = face_data(0.0, m, mod)
    assert fd.alpha[i] == pytest.approx(sign * 1e-9, rel=1e-6)
    delta = log_phi_gaps(m)[i]
    b = fd.b[i]
    limit = A * (u_ip1 - u_i) / delta + b * 0.5 * (u_i + u_ip1)
    val = flux_interior(i, u_i, u_ip1, 0.0, m, mod).value
    assert abs(val - limit) <= 1e-10 * abs(limit)


def test_no_jump_at_series_switch():
    z = SMALL_Z
    for s in (1.0, -1.0):
        below = bernoulli(s * z * (1 - 1e-9))
        above = bernoulli(s * z * (1 + 1e-9))
        assert abs(below - above) <= 1e-10


def test_interior_sign_structure():
    rng = np.random.default_rng(5)
    for _ in range(20):
        mod = MarketModel(rng.uniform(0.05, 0.6), rng.uniform(-0.2, 0.4), rng.uniform(0, 0.3), 400.0)
        fd = face_data(0.0, uniform(64), mod)
        assert np.all(fd.hi[1:-1] > 0) and np.all(fd.lo[1:-1] < 0)


# -- boundary faces ----------------------------------------------------------------


def test_left_face_negative_alpha(tp1_model):
    m = uniform(80)
    f = flux_left(0.3, 0.9, 0.0, m, tp1_model)
    fd = face_data(0.0, m, tp1_model)
    assert fd.alpha[0] < 0
    assert f.coeff_hi == 0.0 and f.coeff_lo == fd.b[0]


def test_left_face_nonnegative_alpha():
    m = uniform(20)
    mod = MarketModel(0.3, 0.3, 0.0, 400.0)
    fd = face_data(0.0, m, mod)
    assert fd.alpha[0] >= 0
    assert flux_left(0.4, 0.4, 0.0, m, mod).value == pytest.approx(fd.b[0] * 0.4, rel=1e-14)
    ref = left_flux_quad(m.nodes[1], m.midpoints[0], fd.a[0], fd.b[0], 0.3, 0.7)
    assert flux_left(0.3, 0.7, 0.0, m, mod).value == pytest.approx(ref, rel=1e-10)
    # linearized form at x_{1/2} = h_0 / 2
    assert flux_left(0.3, 0.7, 0.0, m, mod).coeff_hi == pytest.approx(0.5 * (fd.a[0] + fd.b[0]), rel=1e-14)


def test_right_face_positive_alpha(tp1_model):
    m = uniform(80)
    f = flux_right(0.3, 0.9, 0.0, m, tp1_model)
    fd = face_data(0.0, m, tp1_model)
    assert fd.alpha[-1] > 0
    assert f.coeff_lo == 0.0 and f.coeff_hi == fd.b[-1]


def test_right_face_nonpositive_alpha():
    m = uniform(20)
    mod = MarketModel(0.3, 0.0, 0.3, 400.0)
    fd = face_data(0.0, m, mod)
    assert fd.alpha[-1] <= 0
    assert flux_right(0.4, 0.4, 0.0, m, mod).value == pytest.approx(fd.b[-1] * 0.4, rel=1e-14)
    # closed-form local solution v = u_N + (u_{N-1} - u_N)(1 - x)/(1 - x_{N-1})
    u_nm1, u_n = 0.3, 0.7
    xs, h = m.midpoints[-1], m.steps[-1]
    v = u_n + (u_nm1 - u_n) * (1 - xs) / h
    dv = (u_n - u_nm1) / h
    ref = fd.a[-1] * (1 - xs) * dv + fd.b[-1] * v
    assert flux_right(u_nm1, u_n, 0.0, m, mod).value == pytest.approx(ref, rel=1e-13)


# -- fitted basis ----------------------------------------------------------------


def test_basis_nodal_property(tp1_model):
    m = uniform(16)
    for i in (0, 1, 7, 15, 16):
        vals = basis_eval(i, m.nodes, 0.0, m, tp1_model)
        expect = np.zeros(17)
        expect[i] = 1.0
        np.testing.assert_allclose(vals, expect, atol=1e-14)


def test_basis_partition_of_unity(tp1_model):
    m = power_graded(16)
    x = np.random.default_rng(1).uniform(0, 1, 100)
    total = sum(basis_eval(i, x, 0.0, m, tp1_model) for i in range(17))
    np.testing.assert_allclose(total, 1.0, atol=1e-13)
    np.testing.assert_allclose(interpolate_nodal(np.full(17, 2.5), x, 0.0, m, tp1_model), 2.5, atol=1e-13)


def test_basis_zero_alpha_is_log_profile():
    m = uniform(40)
    i = 17
    mod = model_with_face_b(m.midpoints[i], 0.0)
    x = np.linspace(m.nodes[i], m.nodes[i + 1], 11)
    s = np.log(phi(x))
    expect = (np.log(phi(m.nodes[i + 1])) - s) / (np.log(phi(m.nodes[i + 1])) - np.log(phi(m.nodes[i])))
    np.testing.assert_allclose(basis_eval(i, x, 0.0, m, mod), expect, atol=1e-12)


def test_basis_solves_local_problem(tp1_model):
    # the fitted shape carries a constant flux (A x(1-x) v' + b v) across the interval
    m = uniform(20)
    i = 6
    fd = face_data(0.0, m, tp1_model)
    x = np.linspace(m.nodes[i] + 1e-3, m.nodes[i + 1] - 1e-3, 9)
    eps = 1e-7
    v = basis_eval(i, x, 0.0, m, tp1_model)
    dv = (basis_eval(i, x + eps, 0.0, m, tp1_model) - basis_eval(i, x - eps, 0.0, m, tp1_model)) / (2 * eps)
    rho = 0.045 * x * (1 - x) * dv + fd.b[i] * v
    assert np.ptp(rho) < 1e-7
    assert rho.mean() == pytest.approx(fd.lo[i], rel=1e-6)
