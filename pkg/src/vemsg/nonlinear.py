"""
Nonlinear load, step residual, Jacobian and Newton's method.

Two treatments of the nonlinear load ``int f(u_h) eta_i`` are provided:

``ProductApproximation``
    interpolate ``f(u_h)`` at the vertices first, so the load is
    ``Mbar @ f(u)`` and its derivative ``Mbar @ diag(f'(u))``; no quadrature
    is needed once ``Mbar`` is assembled.
``QuadratureTreatment``
    integrate ``f(Pi0 u_h) Pi0 eta_i`` cell by cell with a quadrature rule;
    the Jacobian needs a fresh quadrature sweep at every Newton iterate.

Both plug into the same two-step theta scheme residual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import bicgstab, splu

from .assembly import GlobalSystem, ProjectedQuadrature

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]

    def __call__(self, u):
        return self.f(u)

    def check_derivative(self, samples=None, eps: float = 1e-6, tol: float = 1e-6) -> bool:
        u = np.linspace(-3.0, 3.0, 13) if samples is None else np.asarray(samples, dtype=float)
        fd = (self.f(u + eps) - self.f(u - eps)) / (2 * eps)
        return bool(np.all(np.abs(fd - self.f_prime(u)) <= tol * np.maximum(1.0, np.abs(fd))))


def sine_gordon() -> Nonlinearity:
    """``f(u) = -sin(u)``."""
    return Nonlinearity("sine_gordon", lambda u: -np.sin(u), lambda u: -np.cos(u))


def quadratic() -> Nonlinearity:
    """``f(u) = u**2``."""
    return Nonlinearity("quadratic", lambda u: u * u, lambda u: 2.0 * u)


def linear(c: float = 1.0) -> Nonlinearity:
    return Nonlinearity("linear", lambda u: c * u, lambda u: np.full_like(u, c, dtype=float))


def zero() -> Nonlinearity:
    return Nonlinearity("zero", np.zeros_like, lambda u: np.zeros_like(u, dtype=float))


NONLINEARITIES = {"sine_gordon": sine_gordon, "quadratic": quadratic, "linear": linear, "zero": zero}


@dataclass(frozen=True)
class NewtonConfig:
    tol_residual: float = 1e-10
    max_iterations: int = 25
    linear_solver_tol: float = 1e-12
    direct_solver_limit: int = 200_000
    max_backtracks: int = 10

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class NewtonReport:
    iterations: int
    final_residual_norm: float
    converged: bool
    residual_history: list = field(default_factory=list)


class LinearSolverError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Load treatments
# ---------------------------------------------------------------------------


def product_approx_load(Mbar, u: np.ndarray, f) -> np.ndarray:
    """Product-approximation load ``Mbar @ f(u)``."""
    return Mbar @ f(u)


def quadrature_load(pq: ProjectedQuadrature, u: np.ndarray, f) -> np.ndarray:
    """Cellwise quadrature of ``f(Pi0 u_h) * Pi0 eta_i``."""
    return pq.load(f(pq.P @ u))


def quadrature_load_derivative(pq: ProjectedQuadrature, u: np.ndarray, f_prime, P=None) -> sp.csr_matrix:
    """``int f'(Pi0 u_h) Pi0 eta_j Pi0 eta_i`` assembled by quadrature."""
    P = pq.P if P is None else P
    d = pq.weights * f_prime(pq.P @ u)
    return (P.T @ sp.diags(d) @ P).tocsr()


class ProductApproximation:
    name = "product_approx"

    def __init__(self, system: GlobalSystem, nonlinearity: Nonlinearity):
        self.Mbar = system.Mbar
        self.nonlinearity = nonlinearity

    def load(self, u):
        return product_approx_load(self.Mbar, u, self.nonlinearity.f)

    def derivative_on(self, free: np.ndarray):
        """Callable ``u -> dF/du`` restricted to the ``free`` rows and columns."""
        Mbar_ff = self.Mbar[free][:, free].tocsr()
        f_prime = self.nonlinearity.f_prime
        return lambda u: Mbar_ff.multiply(f_prime(u[free])[None, :]).tocsr()


class QuadratureTreatment:
    name = "quadrature"

    def __init__(self, pq: ProjectedQuadrature, nonlinearity: Nonlinearity):
        self.pq = pq
        self.nonlinearity = nonlinearity

    def load(self, u):
        return quadrature_load(self.pq, u, self.nonlinearity.f)

    def derivative_on(self, free: np.ndarray):
        P_f = self.pq.P[:, free].tocsr()
        return lambda u: quadrature_load_derivative(self.pq, u, self.nonlinearity.f_prime, P_f)


def make_treatment(name: str, system: GlobalSystem, nonlinearity: Nonlinearity, pq: ProjectedQuadrature | None):
    if name == "product_approx":
        return ProductApproximation(system, nonlinearity)
    if name == "quadrature":
        if pq is None:
            raise ValueError("the quadrature treatment needs projected quadrature data")
        return QuadratureTreatment(pq, nonlinearity)
    raise ValueError(f"unknown nonlinear treatment {name!r}")


# ---------------------------------------------------------------------------
# Scheme residual and Jacobian
# ---------------------------------------------------------------------------


class StepOperator:
    """
    Residual and Jacobian of one step of the two-step theta scheme

        [(1 + g dt/2) M + th dt^2 A] u2 - th dt^2 F(u2)
        - 2 M u1
        + [(1 - g dt/2) M + (1 - th) dt^2 A] u0 - (1 - th) dt^2 F(u0)
        - dt^2 (th b2 + (1 - th) b0)

    restricted to the rows ``free`` (all rows by default). ``F`` is the load
    of the chosen treatment and ``b`` the external source load.
    """

    def __init__(self, system: GlobalSystem, gamma: float, dt: float, theta: float, treatment, free=None):
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        n = system.n_dofs
        self.free = np.arange(n) if free is None else np.asarray(free)
        self.gamma, self.dt, self.theta = gamma, dt, theta
        self.treatment = treatment
        M, A = system.M, system.A
        dt2 = dt * dt
        base_next = ((1 + 0.5 * gamma * dt) * M + theta * dt2 * A).tocsr()
        base_prev = ((1 - 0.5 * gamma * dt) * M + (1 - theta) * dt2 * A).tocsr()
        rows = self.free
        self.base_next_rows = base_next[rows]
        self.base_prev_rows = base_prev[rows]
        self.M2_rows = (2.0 * M).tocsr()[rows]
        self.base_ff = self.base_next_rows[:, rows].tocsr()
        self._load_derivative = treatment.derivative_on(self.free)

    def history(self, u_mid, u_prev, source_next=None, source_prev=None) -> np.ndarray:
        """The part of the residual that does not depend on ``u_next``."""
        dt2, th = self.dt**2, self.theta
        r = -(self.M2_rows @ u_mid) + self.base_prev_rows @ u_prev
        if th < 1.0:
            r -= (1 - th) * dt2 * self.treatment.load(u_prev)[self.free]
        if source_next is not None:
            r -= dt2 * th * source_next[self.free]
        if source_prev is not None:
            r -= dt2 * (1 - th) * source_prev[self.free]
        return r

    def residual(self, u_next, history: np.ndarray) -> np.ndarray:
        r = self.base_next_rows @ u_next + history
        if self.theta > 0.0:
            r -= self.theta * self.dt**2 * self.treatment.load(u_next)[self.free]
        return r

    def jacobian(self, u_next) -> sp.csr_matrix:
        if self.theta == 0.0:
            return self.base_ff
        return (self.base_ff - (self.theta * self.dt**2) * self._load_derivative(u_next)).tocsr()


def residual(gamma, dt, theta, system, u_next, u_mid, u_prev, f, source_next=None, source_prev=None):
    """Full-length step residual with the product-approximation load."""
    op = StepOperator(system, gamma, dt, theta, ProductApproximation(system, f))
    return op.residual(u_next, op.history(u_mid, u_prev, source_next, source_prev))


def jacobian(gamma, dt, theta, system, u_next, f) -> sp.csr_matrix:
    """Full step Jacobian with the product-approximation load."""
    return StepOperator(system, gamma, dt, theta, ProductApproximation(system, f)).jacobian(u_next)


def quadrature_jacobian(pq: ProjectedQuadrature, u, f_prime, base, theta: float, dt: float) -> sp.csr_matrix:
    """``base - theta dt^2 int f'(Pi0 u_h) Pi0 eta_j Pi0 eta_i`` (full, unrestricted)."""
    return (base - (theta * dt * dt) * quadrature_load_derivative(pq, u, f_prime)).tocsr()


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------


def _linear_solve(J: sp.csr_matrix, r: np.ndarray, config: NewtonConfig) -> np.ndarray:
    rnorm = np.linalg.norm(r)
    if J.shape[0] <= config.direct_solver_limit:
        try:
            lu = splu(J.tocsc())
        except RuntimeError as exc:
            raise LinearSolverError(str(exc)) from exc
        x = lu.solve(r)
        res = r - J @ x
        if np.linalg.norm(res) > config.linear_solver_tol * rnorm:
            # one round of iterative refinement
            x += lu.solve(res)
            res = r - J @ x
    else:
        precond = sp.diags(1.0 / J.diagonal())
        x, info = bicgstab(J, r, rtol=config.linear_solver_tol, M=precond, maxiter=10_000)
        if info != 0:
            raise LinearSolverError(f"BiCGSTAB stopped with flag {info}")
        res = r - J @ x
    if not np.linalg.norm(res) <= config.linear_solver_tol * rnorm:
        raise LinearSolverError(
            f"linear residual {np.linalg.norm(res) / rnorm:.3e} above tolerance {config.linear_solver_tol:.1e}"
        )
    return x


def newton_solve(config: NewtonConfig, residual_fn, jacobian_fn, u_initial) -> tuple[np.ndarray, NewtonReport]:
    """
    Newton's method ``u <- u - J(u)^-1 R(u)`` until ``||R||_2 <= tol_residual``.

    A step that increases the residual norm is halved up to
    ``config.max_backtracks`` times and the best trial point kept. Non-convergence is logged and reported
    through ``NewtonReport.converged``; it is not raised here.
    """
    u = np.array(u_initial, dtype=float)
    r = residual_fn(u)
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    it = 0
    while rnorm > config.tol_residual and it < config.max_iterations:
        du = _linear_solve(jacobian_fn(u), r, config)
        u_new = u - du
        r_new = residual_fn(u_new)
        n_new = float(np.linalg.norm(r_new))
        step = 1.0
        for _ in range(config.max_backtracks):
            if n_new < rnorm:
                break
            step *= 0.5
            u_try = u - step * du
            r_try = residual_fn(u_try)
            n_try = float(np.linalg.norm(r_try))
            if n_try < n_new:
                u_new, r_new, n_new = u_try, r_try, n_try
        u, r, rnorm = u_new, r_new, n_new
        history.append(rnorm)
        it += 1
    converged = rnorm <= config.tol_residual
    if not converged:
        logger.warning("Newton stopped after %d iterations with |R| = %.3e", it, rnorm)
    return u, NewtonReport(it, rnorm, converged, history)
