"""Model problems: exact solutions, manufactured sources and initial data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import BoundaryData
from .nonlinear import Nonlinearity, quadratic, sine_gordon


@dataclass(frozen=True)
class Problem:
    name: str
    domain_rect: tuple[float, float, float, float]
    nonlinearity: Nonlinearity
    boundary: BoundaryData
    initial_value: Callable
    initial_velocity: Callable
    gamma: float = 0.0
    T: float = 1.0
    source: Callable | None = None
    exact: Callable | None = None  # (x, y, t) -> u


# -- kink travelling along x + y -------------------------------------------


def kink_exact(x, y, t):
    return 4.0 * np.arctan(np.exp(x + y - t))


def kink_velocity(x, y):
    s = np.exp(x + y)
    return -4.0 * s / (1.0 + s * s)


def kink_problem(T: float = 1.0) -> Problem:
    return Problem(
        name="test1",
        domain_rect=(-7.0, 7.0, -7.0, 7.0),
        nonlinearity=sine_gordon(),
        boundary=BoundaryData("dirichlet", kink_exact),
        initial_value=lambda x, y: kink_exact(x, y, 0.0),
        initial_velocity=kink_velocity,
        T=T,
        exact=kink_exact,
    )


# -- decaying bubble with u^2 nonlinearity ---------------------------------


def bubble_exact(x, y, t):
    return np.exp(-t) * x * y * (1 - x) * (1 - y)


def bubble_source(x, y, t):
    # u_tt = u and -lap u = 2 e^-t (y(1-y) + x(1-x)); g = u_tt - lap u - u^2
    u = bubble_exact(x, y, t)
    return u + 2.0 * np.exp(-t) * (y * (1 - y) + x * (1 - x)) - u * u


def bubble_problem(T: float = 1.0) -> Problem:
    return Problem(
        name="test2",
        domain_rect=(0.0, 1.0, 0.0, 1.0),
        nonlinearity=quadratic(),
        boundary=BoundaryData.homogeneous_dirichlet(),
        initial_value=lambda x, y: bubble_exact(x, y, 0.0),
        initial_velocity=lambda x, y: -bubble_exact(x, y, 0.0),
        T=T,
        source=bubble_source,
        exact=bubble_exact,
    )


# -- standing sine mode with sine-Gordon nonlinearity ----------------------


def mode_exact(x, y, t):
    return np.sin(t) * np.sin(np.pi * x) * np.sin(np.pi * y)


def mode_source(x, y, t):
    # u_tt = -u and -lap u = 2 pi^2 u; g = u_tt - lap u - f(u) with f = -sin
    u = mode_exact(x, y, t)
    return (2.0 * np.pi**2 - 1.0) * u + np.sin(u)


def mode_problem(T: float = 1.0) -> Problem:
    return Problem(
        name="test3",
        domain_rect=(0.0, 1.0, 0.0, 1.0),
        nonlinearity=sine_gordon(),
        boundary=BoundaryData.homogeneous_dirichlet(),
        initial_value=lambda x, y: np.zeros_like(x),
        initial_velocity=lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y),
        T=T,
        source=mode_source,
        exact=mode_exact,
    )


# -- colliding ring solitons (one quarter, Neumann) ------------------------

RING_CENTER = (-3.0, -7.0)
RING_RADIUS = 4.0
RING_WIDTH = 0.436
RING_VELOCITY_SCALE = 4.13


def _ring_arg(x, y):
    r = np.hypot(x - RING_CENTER[0], y - RING_CENTER[1])
    return np.exp((RING_RADIUS - r) / RING_WIDTH)


def ring_value(x, y):
    return 4.0 * np.arctan(_ring_arg(x, y))


def ring_velocity(x, y):
    a = _ring_arg(x, y)  # positive, so 1/cosh(a) = 2 e^-a / (1 + e^-2a) cannot overflow
    return RING_VELOCITY_SCALE * 2.0 * np.exp(-a) / (1.0 + np.exp(-2.0 * a))


def ring_problem(T: float = 11.0, gamma: float = 0.05) -> Problem:
    return Problem(
        name="solitons",
        domain_rect=(-10.0, 10.0, -7.0, 7.0),
        nonlinearity=sine_gordon(),
        boundary=BoundaryData.neumann(),
        initial_value=ring_value,
        initial_velocity=ring_velocity,
        gamma=gamma,
        T=T,
    )


PROBLEMS = {"test1": kink_problem, "test2": bubble_problem, "test3": mode_problem, "solitons": ring_problem}
