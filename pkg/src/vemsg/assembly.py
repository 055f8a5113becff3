"""Global VEM matrices, vertex interpolation and Dirichlet elimination."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .mesh import PolygonalMesh
from .quadrature import batched_triangles, triangles_rule
from .vem import OperatorBatch, mesh_batches


@dataclass(eq=False)
class GlobalSystem:
    """
    Assembled stiffness ``A``, stabilised mass ``M`` and projected mass ``Mbar``.

    All three are symmetric CSR matrices over the vertex DOFs.
    """

    mesh: PolygonalMesh
    A: sp.csr_matrix
    M: sp.csr_matrix
    Mbar: sp.csr_matrix
    batches: list[OperatorBatch] = field(repr=False)

    @property
    def n_dofs(self) -> int:
        return self.A.shape[0]

    @property
    def boundary_dofs(self) -> np.ndarray:
        return self.mesh.boundary_vertices

    @property
    def interior_dofs(self) -> np.ndarray:
        return self.mesh.interior_vertices


def _scatter(batches, name, n):
    rows, cols, vals = [], [], []
    for b in batches:
        k = b.n
        rows.append(np.repeat(b.dofs, k, axis=1).ravel())
        cols.append(np.tile(b.dofs, (1, k)).ravel())
        vals.append(getattr(b, name).reshape(len(b.dofs), -1).ravel())
    if not rows:
        return sp.csr_matrix((n, n))
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return mat.tocsr()


def assemble(mesh: PolygonalMesh) -> GlobalSystem:
    """
    Scatter-add the local stiffness, mass and projected-mass matrices.

    Cells are visited in a fixed order (by vertex count, then cell index), so
    repeated assemblies are bit-identical.
    """
    batches = mesh_batches(mesh)
    n = mesh.n_vertices
    return GlobalSystem(
        mesh=mesh,
        A=_scatter(batches, "K", n),
        M=_scatter(batches, "M", n),
        Mbar=_scatter(batches, "Mbar", n),
        batches=batches,
    )


def interpolate(func: Callable, mesh: PolygonalMesh) -> np.ndarray:
    """Vertex values ``func(x, y)``; ``func`` must accept arrays."""
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    return np.broadcast_to(np.asarray(func(x, y), dtype=float), x.shape).copy()


@dataclass(eq=False)
class ProjectedQuadrature:
    """
    Values of the projected basis functions at cell quadrature points.

    ``P[q, j]`` is the L2 projection of basis function ``j`` (of the cell
    holding point ``q``) evaluated at ``q``. With ``W = diag(weights)``:

    * ``P.T @ (weights * g(points))`` is the vector of ``int g * Pi0 eta_i``,
    * ``P.T @ W @ P`` equals ``Mbar`` up to quadrature exactness.
    """

    points: np.ndarray
    weights: np.ndarray
    P: sp.csr_matrix
    degree: int
    PT_W: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        self.PT_W = (self.P.T @ sp.diags(self.weights)).tocsr()

    def load(self, values: np.ndarray) -> np.ndarray:
        """``int g * Pi0 eta_i`` for point values ``g`` at ``points``."""
        return self.PT_W @ values

    def function_load(self, g: Callable, t: float) -> np.ndarray:
        x, y = self.points[:, 0], self.points[:, 1]
        return self.load(np.broadcast_to(np.asarray(g(x, y, t), dtype=float), x.shape))


def projected_quadrature(system: GlobalSystem, degree: int = 4) -> ProjectedQuadrature:
    pts_all, w_all, rows, cols, vals = [], [], [], [], []
    offset = 0
    for b in system.batches:
        xy = system.mesh.vertices[b.dofs]
        tris = batched_triangles(xy, b.centroids)
        pts, wts = triangles_rule(tris, degree)
        nc = len(b.dofs)
        pts = pts.reshape(nc, -1, 2)
        wts = wts.reshape(nc, -1)
        nq = pts.shape[1]
        m = np.empty((nc, nq, 3))
        m[..., 0] = 1.0
        m[..., 1:] = (pts - b.centroids[:, None, :]) / b.diameters[:, None, None]
        phi = m @ b.Pi_star  # (nc, nq, n)
        q_index = offset + np.arange(nc * nq).reshape(nc, nq)
        rows.append(np.repeat(q_index[..., None], b.n, axis=2).ravel())
        cols.append(np.repeat(b.dofs[:, None, :], nq, axis=1).ravel())
        vals.append(phi.ravel())
        pts_all.append(pts.reshape(-1, 2))
        w_all.append(wts.ravel())
        offset += nc * nq
    P = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(offset, system.n_dofs)
    ).tocsr()
    return ProjectedQuadrature(np.concatenate(pts_all), np.concatenate(w_all), P, degree)


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data ``trace(x, y, t)`` or the natural homogeneous Neumann condition."""

    kind: str = "dirichlet"
    trace: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann_homogeneous"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")

    @classmethod
    def homogeneous_dirichlet(cls):
        return cls("dirichlet", lambda x, y, t: np.zeros_like(x))

    @classmethod
    def neumann(cls):
        return cls("neumann_homogeneous")

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == "dirichlet"


@dataclass(eq=False)
class DirichletView:
    """
    Partition of the DOFs into free and fixed sets at one time level.

    For the Neumann kind every DOF is free and ``values`` is empty.
    """

    free: np.ndarray
    fixed: np.ndarray
    values: np.ndarray
    n_dofs: int

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        u = np.empty(self.n_dofs)
        u[self.free] = u_free
        u[self.fixed] = self.values
        return u

    def pin(self, u: np.ndarray) -> np.ndarray:
        u = np.array(u, dtype=float)
        u[self.fixed] = self.values
        return u

    def reduce(self, matrix: sp.spmatrix) -> sp.csr_matrix:
        return matrix.tocsr()[self.free][:, self.free]

    def lift(self, matrix: sp.spmatrix) -> np.ndarray:
        """``-matrix[free, fixed] @ values``."""
        if len(self.fixed) == 0:
            return np.zeros(len(self.free))
        return -(matrix.tocsr()[self.free][:, self.fixed] @ self.values)


def apply_dirichlet(system: GlobalSystem, boundary: BoundaryData, t: float = 0.0) -> DirichletView:
    n = system.n_dofs
    if not boundary.is_dirichlet:
        return DirichletView(np.arange(n), np.array([], dtype=np.int64), np.array([]), n)
    fixed = system.boundary_dofs
    x, y = system.mesh.vertices[fixed].T
    values = np.broadcast_to(np.asarray(boundary.trace(x, y, t), dtype=float), x.shape).copy()
    return DirichletView(system.interior_dofs, fixed, values, n)


def solve_laplace(system: GlobalSystem, boundary: BoundaryData) -> np.ndarray:
    """Discrete harmonic extension of the Dirichlet trace (used by the patch test)."""
    view = apply_dirichlet(system, boundary, 0.0)
    u_free = spsolve(view.reduce(system.A).tocsc(), view.lift(system.A))
    return view.expand(np.atleast_1d(u_free))
