"""
Two-step theta scheme in time (Crank-Nicolson for theta = 1/2).

The first level is ``u0 = I_h h``; the second is the first-order start
``u1 = u0 + dt I_h g``. Every later level solves the nonlinear step system
with Newton's method, warm-started from the previous level.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import (
    BoundaryData,
    GlobalSystem,
    ProjectedQuadrature,
    apply_dirichlet,
    assemble,
    interpolate,
    projected_quadrature,
)
from .mesh import PolygonalMesh
from .nonlinear import NewtonConfig, NewtonReport, Nonlinearity, StepOperator, make_treatment, newton_solve


class NewtonConvergenceError(RuntimeError):
    def __init__(self, step_index: int, report: NewtonReport):
        self.step_index = step_index
        self.report = report
        super().__init__(
            f"Newton did not converge at step {step_index}: "
            f"{report.iterations} iterations, |R| = {report.final_residual_norm:.3e}"
        )


@dataclass
class SchemeParams:
    """
    Parameters of one time-dependent run.

    ``source`` is ``g(x, y, t)``, ``initial_value`` is ``h(x, y)`` and
    ``initial_velocity`` is the initial time derivative, all vectorised.
    """

    gamma: float
    theta: float
    dt: float
    T: float
    nonlinearity: Nonlinearity
    boundary: BoundaryData
    initial_value: Callable
    initial_velocity: Callable
    source: Callable | None = None
    treatment: str = "product_approx"
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    quadrature_degree: int = 4
    second_order_start: bool = False

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if abs(self.n_steps * self.dt - self.T) > 1e-8 * self.dt:
            raise ValueError("dt must divide T")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class Trajectory:
    snapshots: list  # (t, u) pairs in increasing t
    newton_reports: list
    wall_time: float
    system: GlobalSystem = field(repr=False, default=None)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1][1]

    @property
    def newton_total(self) -> int:
        return sum(r.iterations for r in self.newton_reports)

    @property
    def newton_max(self) -> int:
        return max((r.iterations for r in self.newton_reports), default=0)

    def at(self, t: float) -> np.ndarray:
        for ts, u in self.snapshots:
            if abs(ts - t) < 1e-9 * max(1.0, abs(t)):
                return u
        raise KeyError(f"no snapshot at t = {t}")


def initialize(mesh: PolygonalMesh, h_func, g_func, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``u0 = I_h h`` and ``u1 = u0 + dt I_h g``."""
    u0 = interpolate(h_func, mesh)
    return u0, u0 + dt * interpolate(g_func, mesh)


class Stepper:
    """Holds the step matrices, the load treatment and the source loads of one run."""

    def __init__(self, params: SchemeParams, system: GlobalSystem, pq: ProjectedQuadrature | None = None):
        self.params = params
        self.system = system
        needs_pq = params.source is not None or params.treatment == "quadrature"
        if pq is None and needs_pq:
            pq = projected_quadrature(system, params.quadrature_degree)
        self.pq = pq
        self.treatment = make_treatment(params.treatment, system, params.nonlinearity, pq)
        self.free = apply_dirichlet(system, params.boundary, 0.0).free
        self.operator = StepOperator(system, params.gamma, params.dt, params.theta, self.treatment, self.free)
        self._source_cache = {}

    def source_load(self, t: float):
        if self.params.source is None:
            return None
        key = round(t / self.params.dt)
        if key not in self._source_cache:
            if len(self._source_cache) > 4:
                self._source_cache.clear()
            self._source_cache[key] = self.pq.function_load(self.params.source, t)
        return self._source_cache[key]

    def pin(self, u: np.ndarray, t: float) -> np.ndarray:
        return apply_dirichlet(self.system, self.params.boundary, t).pin(u)

    def step(self, u_prev, u_mid, t_next, step_index: int = -1) -> tuple[np.ndarray, NewtonReport]:
        """
        Solve for the level at ``t_next`` given the two previous levels.

        Raises
        ------
        NewtonConvergenceError
        """
        dt = self.params.dt
        view = apply_dirichlet(self.system, self.params.boundary, t_next)
        hist = self.operator.history(u_mid, u_prev, self.source_load(t_next), self.source_load(t_next - 2 * dt))
        op = self.operator

        def res(uf):
            return op.residual(view.expand(uf), hist)

        def jac(uf):
            return op.jacobian(view.expand(uf))

        uf, report = newton_solve(self.params.newton, res, jac, u_mid[view.free])
        if not report.converged:
            raise NewtonConvergenceError(step_index, report)
        return view.expand(uf), report

    def second_order_u1(self, u0, v0):
        """Taylor start ``u0 + dt v0 + dt^2/2 a0`` with ``a0`` from the semi-discrete equation."""
        p = self.params
        rhs = -(self.system.A @ u0) + self.treatment.load(u0) - p.gamma * (self.system.M @ v0)
        b = self.source_load(0.0)
        if b is not None:
            rhs = rhs + b
        view = apply_dirichlet(self.system, p.boundary, 0.0)
        a0 = np.zeros_like(u0)
        a0[view.free] = splu(view.reduce(self.system.M).tocsc()).solve(rhs[view.free])
        return u0 + p.dt * v0 + 0.5 * p.dt**2 * a0


def step(params: SchemeParams, system: GlobalSystem, u_prev, u_mid, t_next):
    return Stepper(params, system).step(u_prev, u_mid, t_next)


def run(
    params: SchemeParams,
    mesh: PolygonalMesh,
    snapshot_times=None,
    system: GlobalSystem | None = None,
    pq: ProjectedQuadrature | None = None,
    full_history: bool = False,
    start=None,
) -> Trajectory:
    """
    Integrate from ``t = 0`` to ``T``.

    Parameters
    ----------
    snapshot_times : iterable of float, optional
        Times at which to keep the solution; ``[T]`` by default. Each must be
        a multiple of ``dt``.
    start : (n, u_prev, u_mid), optional
        Resume from levels ``n - 1`` and ``n`` instead of the initial data.
    """
    t0 = time.perf_counter()
    system = assemble(mesh) if system is None else system
    stepper = Stepper(params, system, pq)
    dt, N = params.dt, params.n_steps

    wanted = {}
    for t in [params.T] if snapshot_times is None else snapshot_times:
        k = int(round(t / dt))
        if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= k <= N:
            raise ValueError(f"snapshot time {t} is not a step of the run")
        wanted[k] = t

    snapshots, reports = [], []

    def keep(k, u):
        if full_history or k in wanted:
            snapshots.append((wanted.get(k, k * dt), u.copy()))

    if start is None:
        u_prev, u_mid = initialize(mesh, params.initial_value, params.initial_velocity, dt)
        if params.second_order_start:
            u_mid = stepper.second_order_u1(u_prev, interpolate(params.initial_velocity, mesh))
        if params.boundary.is_dirichlet:
            u_prev = stepper.pin(u_prev, 0.0)
            u_mid = stepper.pin(u_mid, dt)
        keep(0, u_prev)
        if N >= 1:
            keep(1, u_mid)
        first = 2
    else:
        n, u_prev, u_mid = start
        u_prev, u_mid = np.array(u_prev, dtype=float), np.array(u_mid, dtype=float)
        first = n + 1

    for k in range(first, N + 1):
        u_next, report = stepper.step(u_prev, u_mid, k * dt, step_index=k)
        reports.append(report)
        u_prev, u_mid = u_mid, u_next
        keep(k, u_mid)
    return Trajectory(snapshots, reports, time.perf_counter() - t0, system)


def discrete_energy(system: GlobalSystem, u_new, u_old, dt: float, potential: Callable | None = None) -> float:
    """
    Energy of the theta = 1/2 scheme between two levels,

    ``1/2 |(u_new - u_old)/dt|_M^2 + 1/4 (|u_new|_A^2 + |u_old|_A^2) + V``

    where ``V`` averages ``sum_i (Mbar 1)_i potential(u_i)`` over both levels
    (``potential = 1 - cos`` for sine-Gordon).
    """
    v = (u_new - u_old) / dt
    e = 0.5 * v @ (system.M @ v) + 0.25 * (u_new @ (system.A @ u_new) + u_old @ (system.A @ u_old))
    if potential is not None:
        w = system.Mbar @ np.ones(system.n_dofs)
        e += 0.5 * (w @ potential(u_new) + w @ potential(u_old))
    return float(e)
