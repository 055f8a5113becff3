import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from vemsg.assembly import GlobalSystem, assemble, projected_quadrature
from vemsg.mesh import generate_distorted_quads, generate_voronoi, single_cell_mesh
from vemsg.nonlinear import (
    NewtonConfig,
    Nonlinearity,
    ProductApproximation,
    QuadratureTreatment,
    StepOperator,
    jacobian,
    linear,
    make_treatment,
    newton_solve,
    product_approx_load,
    quadratic,
    quadrature_jacobian,
    quadrature_load,
    residual,
    sine_gordon,
)
from vemsg.quadrature import polygon_quadrature


@pytest.fixture(scope="module")
def system():
    return assemble(generate_voronoi((0.0, 1.0, 0.0, 1.0), 60, 10, 5))


@pytest.fixture(scope="module")
def pq(system):
    return projected_quadrature(system, 4)


def scalar_system():
    one = sp.csr_matrix([[1.0]])
    return GlobalSystem(mesh=None, A=sp.csr_matrix((1, 1)), M=one, Mbar=one, batches=[])


def fd_jacobian(fun, u, eps=1e-6):
    r0 = fun(u)
    cols = []
    for j in range(len(u)):
        e = np.zeros_like(u)
        e[j] = eps
        cols.append((fun(u + e) - fun(u - e)) / (2 * eps))
    return np.column_stack(cols), r0


# -- nonlinearities ----------------------------------------------------------


@pytest.mark.parametrize("nl", [sine_gordon(), quadratic(), linear(2.5)])
def test_derivatives_consistent(nl):
    assert nl.check_derivative()


def test_bad_derivative_detected():
    assert not Nonlinearity("wrong", np.sin, np.sin).check_derivative()


# -- loads -------------------------------------------------------------------


def test_product_load_zero_state(system):
    assert not np.any(product_approx_load(system.Mbar, np.zeros(system.n_dofs), sine_gordon().f))


def test_product_load_identity(system):
    u = np.random.default_rng(0).normal(size=system.n_dofs)
    np.testing.assert_array_equal(product_approx_load(system.Mbar, u, lambda v: v), system.Mbar @ u)


def test_product_load_single_cell_against_projected_quadrature():
    xy = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    s = assemble(single_cell_mesh(xy))
    load = product_approx_load(s.Mbar, np.full(4, np.pi / 2), sine_gordon().f)
    # -int Pi0 eta_i computed from an independent degree-2 rule
    ops = s.batches[0].operators(0)
    p, w = polygon_quadrature(xy, 2)
    m = np.column_stack([np.ones(len(p)), (p - ops.basis.centroid) / ops.basis.diameter])
    np.testing.assert_allclose(load, -(w @ (m @ ops.Pi_star)), atol=1e-14)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_product_load_linear_in_f(alpha, beta):
    s = assemble(generate_distorted_quads(4, 4, 0.2, 0))
    u = np.linspace(-1, 1, s.n_dofs)
    f, g = np.sin, np.square
    lhs = product_approx_load(s.Mbar, u, lambda v: alpha * f(v) + beta * g(v))
    rhs = alpha * product_approx_load(s.Mbar, u, f) + beta * product_approx_load(s.Mbar, u, g)
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_quadrature_load_zero_state(system, pq):
    assert not np.any(quadrature_load(pq, np.zeros(system.n_dofs), sine_gordon().f))


def test_quadrature_load_linear_f_matches_product(system, pq):
    u = np.random.default_rng(1).normal(size=system.n_dofs)
    np.testing.assert_allclose(quadrature_load(pq, u, lambda v: v), system.Mbar @ u, atol=1e-10)


@pytest.mark.parametrize("c", [-1.3, 0.0, 2.0])
def test_quadrature_load_constant_state(system, pq, c):
    f = sine_gordon().f
    u = np.full(system.n_dofs, c)
    np.testing.assert_allclose(quadrature_load(pq, u, f), system.Mbar @ f(u), atol=1e-10)


def test_treatments_agree_on_linear_state_and_linear_f(system, pq):
    x, y = system.mesh.vertices.T
    u = 0.3 + x - 2 * y
    nl = linear(0.7)
    np.testing.assert_allclose(
        ProductApproximation(system, nl).load(u), QuadratureTreatment(pq, nl).load(u), atol=1e-10
    )


def test_make_treatment_errors(system):
    with pytest.raises(ValueError):
        make_treatment("quadrature", system, sine_gordon(), None)
    with pytest.raises(ValueError):
        make_treatment("nope", system, sine_gordon(), None)


# -- residual and Jacobian ---------------------------------------------------


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 0.5))
def test_scalar_residual(w, u_mid, u_prev, dt):
    r = residual(0.0, dt, 0.5, scalar_system(), np.array([w]), np.array([u_mid]), np.array([u_prev]), sine_gordon())
    expected = w + dt**2 / 2 * np.sin(w) - 2 * u_mid + u_prev + dt**2 / 2 * np.sin(u_prev)
    assert r[0] == pytest.approx(expected, abs=1e-13)


def test_residual_theta_general_scalar():
    s = scalar_system()
    dt, th, g = 0.2, 0.3, 0.4
    w, um, up, b2, b0 = 0.5, 0.4, 0.2, 1.5, -0.5
    f = quadratic()
    r = residual(g, dt, th, s, np.array([w]), np.array([um]), np.array([up]), f, np.array([b2]), np.array([b0]))
    expected = (
        (1 + g * dt / 2) * w - th * dt**2 * w * w - 2 * um + (1 - g * dt / 2) * up
        - (1 - th) * dt**2 * up * up - dt**2 * (th * b2 + (1 - th) * b0)
    )
    assert r[0] == pytest.approx(expected, abs=1e-15)


def test_theta_out_of_range(system):
    with pytest.raises(ValueError):
        StepOperator(system, 0.0, 0.1, 1.5, ProductApproximation(system, sine_gordon()))


def test_linear_jacobian_is_constant(system):
    dt, th = 0.1, 0.5
    base = (system.M + th * dt * dt * system.A).toarray()
    expected = base - th * dt * dt * system.Mbar.toarray()
    rng = np.random.default_rng(2)
    for _ in range(2):
        J = jacobian(0.0, dt, th, system, rng.normal(size=system.n_dofs), linear(1.0))
        np.testing.assert_allclose(J.toarray(), expected, atol=1e-14)


def test_sine_gordon_jacobian_at_zero(system, pq):
    dt = 0.1
    base = (system.M + 0.5 * dt * dt * system.A).tocsr()
    expected = (base + 0.5 * dt * dt * system.Mbar).toarray()
    J = jacobian(0.0, dt, 0.5, system, np.zeros(system.n_dofs), sine_gordon())
    np.testing.assert_allclose(J.toarray(), expected, atol=1e-14)
    Jq = quadrature_jacobian(pq, np.zeros(system.n_dofs), sine_gordon().f_prime, base, 0.5, dt)
    np.testing.assert_allclose(Jq.toarray(), expected, atol=1e-12)


def test_quadrature_jacobian_linear_f_matches_closed_form(system, pq):
    dt = 0.05
    base = (system.M + 0.5 * dt * dt * system.A).tocsr()
    u = np.random.default_rng(3).normal(size=system.n_dofs)
    nl = linear(-1.7)
    Jq = quadrature_jacobian(pq, u, nl.f_prime, base, 0.5, dt)
    np.testing.assert_allclose(Jq.toarray(), jacobian(0.0, dt, 0.5, system, u, nl).toarray(), atol=1e-10)


def test_jacobian_sparsity_within_mass_and_stiffness(system):
    J = jacobian(0.05, 0.1, 0.5, system, np.ones(system.n_dofs), sine_gordon())
    allowed = (abs(system.M) + abs(system.A) + abs(system.Mbar)).tocsr()
    pattern = J.tocoo()
    assert all(allowed[r, c] != 0 for r, c in zip(pattern.row, pattern.col))


@pytest.mark.parametrize("treatment", ["product_approx", "quadrature"])
@pytest.mark.parametrize("nl", [sine_gordon(), quadratic()], ids=["sine_gordon", "quadratic"])
def test_finite_difference_jacobian(system, pq, treatment, nl):
    rng = np.random.default_rng(4)
    op = StepOperator(system, 0.05, 0.1, 0.5, make_treatment(treatment, system, nl, pq))
    hist = op.history(rng.normal(size=system.n_dofs), rng.normal(size=system.n_dofs))
    u = rng.normal(size=system.n_dofs)
    fd, _ = fd_jacobian(lambda v: op.residual(v, hist), u)
    J = op.jacobian(u).toarray()
    assert np.linalg.norm(J - fd) <= 1e-5 * np.linalg.norm(J)


@given(st.integers(0, 1000))
def test_sine_gordon_jacobian_positive_definite(seed):
    s = assemble(generate_distorted_quads(5, 5, 0.2, seed % 50))
    u = np.random.default_rng(seed).uniform(-10, 10, s.n_dofs)
    J = jacobian(0.0, 0.05, 0.5, s, u, sine_gordon()).toarray()
    assert np.linalg.eigvalsh(0.5 * (J + J.T)).min() > 0


# -- Newton ------------------------------------------------------------------


def test_newton_linear_one_iteration(system):
    op = StepOperator(system, 0.0, 0.1, 0.5, ProductApproximation(system, linear(1.0)))
    rng = np.random.default_rng(5)
    hist = op.history(rng.normal(size=system.n_dofs), rng.normal(size=system.n_dofs))
    u, rep = newton_solve(NewtonConfig(), lambda v: op.residual(v, hist), op.jacobian, np.zeros(system.n_dofs))
    assert rep.converged and rep.iterations == 1
    assert rep.final_residual_norm <= 1e-10


def test_newton_quadratic_convergence(system):
    op = StepOperator(system, 0.0, 0.5, 0.5, ProductApproximation(system, sine_gordon()))
    u_mid = np.full(system.n_dofs, 2.0)
    hist = op.history(u_mid, np.zeros(system.n_dofs))
    cfg = NewtonConfig(tol_residual=1e-14)
    _, rep = newton_solve(cfg, lambda v: op.residual(v, hist), op.jacobian, np.full(system.n_dofs, 8.0))
    h = rep.residual_history
    assert rep.iterations >= 3
    pairs = [(a, b) for a, b in zip(h, h[1:]) if a < 1e-2 and b > 1e-14]
    assert pairs
    assert all(b <= 10.0 * a * a for a, b in pairs)


def test_newton_reports_non_convergence():
    cfg = NewtonConfig(max_iterations=2)
    u, rep = newton_solve(cfg, lambda v: np.exp(v) - 0.5 * v + 10.0, lambda v: sp.csr_matrix(np.diag(np.exp(v) - 0.5)), np.zeros(1))
    assert not rep.converged and rep.iterations == 2
    assert len(rep.residual_history) == 3


def test_newton_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(tol_residual=0.0)
    with pytest.raises(ValueError):
        NewtonConfig(max_iterations=0)
