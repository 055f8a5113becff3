"""Lowest-order virtual elements for the damped sine-Gordon equation on polygonal meshes."""

from .assembly import BoundaryData, GlobalSystem, apply_dirichlet, assemble, interpolate, projected_quadrature
from .mesh import (
    PolygonalMesh,
    cell_geometry,
    check_regularity,
    generate_distorted_quads,
    generate_nonconvex,
    generate_triangles,
    generate_voronoi,
    read_mesh,
    write_mesh,
)
from .nonlinear import NewtonConfig, NewtonReport, Nonlinearity, newton_solve, quadratic, sine_gordon
from .norms import ConvergenceRecord, rates, relative_h1, relative_l2
from .timestepper import SchemeParams, Trajectory, initialize, run, step
from .vem import LocalOperators, LocalMatrices, build_operators, local_matrices

__version__ = "0.1.0"

__all__ = [
    "BoundaryData",
    "ConvergenceRecord",
    "GlobalSystem",
    "LocalMatrices",
    "LocalOperators",
    "NewtonConfig",
    "NewtonReport",
    "Nonlinearity",
    "PolygonalMesh",
    "SchemeParams",
    "Trajectory",
    "apply_dirichlet",
    "assemble",
    "build_operators",
    "cell_geometry",
    "check_regularity",
    "generate_distorted_quads",
    "generate_nonconvex",
    "generate_triangles",
    "generate_voronoi",
    "initialize",
    "interpolate",
    "local_matrices",
    "newton_solve",
    "projected_quadrature",
    "quadratic",
    "rates",
    "read_mesh",
    "relative_h1",
    "relative_l2",
    "run",
    "sine_gordon",
    "step",
    "write_mesh",
]
