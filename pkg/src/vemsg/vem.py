"""
Lowest-order (k = 1) virtual element operators on polygonal cells.

Every cell carries the scaled monomial basis ``{1, (x - xK)/hK, (y - yK)/hK}``
and one degree of freedom per vertex. From the vertex coordinates alone we
build

* ``D``   (N x 3): monomial values at the vertices,
* ``B``   (3 x N): right-hand side of the elliptic projection, first row the
  boundary-average constraint,
* ``G = B D``, ``Pi_star = G^-1 B`` (projection in monomial coefficients) and
  ``Pi_dof = D Pi_star`` (projection in vertex values),
* ``H``   (3 x 3): monomial Gram matrix on the cell.

On the enhanced space the L2 projection onto P1 coincides with the elliptic
one, so ``Pi_star`` serves both the stiffness and the mass matrices.

The stabilisers are the identity on ``(I - Pi_dof)`` with scale 1 for the
stiffness and ``area`` for the mass.

Cells are processed in batches of equal vertex count; the single-cell
functions below wrap the batched kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import PolygonalMesh, cell_geometry
from .quadrature import batched_triangles, triangles_rule


class DegenerateCellError(ValueError):
    def __init__(self, cell_id, cond):
        self.cell_id = cell_id
        super().__init__(f"cell {cell_id}: projection matrix G is singular (condition number {cond:.3e})")


@dataclass(frozen=True)
class ScaledMonomialBasis:
    centroid: np.ndarray
    diameter: float

    def __post_init__(self):
        if not self.diameter > 0:
            raise ValueError("diameter must be positive")

    def __call__(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        s = (p - self.centroid) / self.diameter
        return np.concatenate([np.ones(p.shape[:-1] + (1,)), s], axis=-1)

    @property
    def gradients(self) -> np.ndarray:
        """Constant gradients of the three monomials, shape (3, 2)."""
        return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]) / np.array([1.0, self.diameter, self.diameter])[:, None]


def eval_monomials(basis: ScaledMonomialBasis, point) -> np.ndarray:
    return basis(point)


@dataclass(frozen=True)
class LocalOperators:
    D: np.ndarray
    B: np.ndarray
    G: np.ndarray
    Gtilde: np.ndarray
    H: np.ndarray
    Pi_star: np.ndarray
    Pi_dof: np.ndarray
    area: float
    basis: ScaledMonomialBasis


@dataclass(frozen=True)
class LocalMatrices:
    K_E: np.ndarray
    M_E: np.ndarray
    Mbar_E: np.ndarray


@dataclass
class OperatorBatch:
    """Operators and local matrices for cells sharing the vertex count ``n``."""

    cell_ids: np.ndarray  # (nc,)
    dofs: np.ndarray  # (nc, n) global vertex indices
    centroids: np.ndarray  # (nc, 2)
    diameters: np.ndarray  # (nc,)
    areas: np.ndarray  # (nc,)
    D: np.ndarray  # (nc, n, 3)
    B: np.ndarray  # (nc, 3, n)
    G: np.ndarray  # (nc, 3, 3)
    H: np.ndarray  # (nc, 3, 3)
    Pi_star: np.ndarray  # (nc, 3, n)
    Pi_dof: np.ndarray  # (nc, n, n)
    K: np.ndarray  # (nc, n, n)
    M: np.ndarray  # (nc, n, n)
    Mbar: np.ndarray  # (nc, n, n)

    @property
    def n(self) -> int:
        return self.dofs.shape[1]

    def operators(self, i: int) -> LocalOperators:
        Gt = self.G[i].copy()
        Gt[0] = 0.0
        return LocalOperators(
            D=self.D[i],
            B=self.B[i],
            G=self.G[i],
            Gtilde=Gt,
            H=self.H[i],
            Pi_star=self.Pi_star[i],
            Pi_dof=self.Pi_dof[i],
            area=float(self.areas[i]),
            basis=ScaledMonomialBasis(self.centroids[i], float(self.diameters[i])),
        )

    def matrices(self, i: int) -> LocalMatrices:
        return LocalMatrices(self.K[i], self.M[i], self.Mbar[i])


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def build_batch(
    xy: np.ndarray,
    centroids: np.ndarray,
    diameters: np.ndarray,
    areas: np.ndarray,
    cell_ids=None,
    dofs=None,
    cond_limit: float = 1e12,
) -> OperatorBatch:
    """
    Local operators for ``nc`` cells with ``n`` vertices each.

    Parameters
    ----------
    xy : (nc, n, 2) array
        Counter-clockwise vertex coordinates.
    centroids, diameters, areas
        Cell geometry.

    Raises
    ------
    DegenerateCellError
        If ``G`` is numerically singular for some cell.
    """
    nc, n, _ = xy.shape
    if cell_ids is None:
        cell_ids = np.arange(nc)
    if dofs is None:
        dofs = np.tile(np.arange(n), (nc, 1))
    h = diameters[:, None]

    D = np.empty((nc, n, 3))
    D[..., 0] = 1.0
    D[..., 1:] = (xy - centroids[:, None, :]) / h[..., None]

    prv = np.roll(xy, 1, axis=1)
    nxt = np.roll(xy, -1, axis=1)
    elen = np.linalg.norm(nxt - xy, axis=-1)  # edge i runs from vertex i to i+1
    perimeter = elen.sum(1, keepdims=True)
    B = np.empty((nc, 3, n))
    B[:, 0, :] = (np.roll(elen, 1, axis=1) + elen) / (2.0 * perimeter)
    # |e| n_e = (dy, -dx) on a CCW boundary; half of each edge goes to either end
    B[:, 1, :] = (nxt[..., 1] - prv[..., 1]) / (2.0 * h)
    B[:, 2, :] = (prv[..., 0] - nxt[..., 0]) / (2.0 * h)

    G = B @ D
    cond = np.linalg.cond(G)
    bad = np.flatnonzero(~(cond < cond_limit))
    if len(bad):
        raise DegenerateCellError(int(cell_ids[bad[0]]), float(cond[bad[0]]))
    Pi_star = np.linalg.solve(G, B)
    Pi_dof = D @ Pi_star

    tris = batched_triangles(xy, centroids)
    pts, wts = triangles_rule(tris, 2)
    pts = pts.reshape(nc, -1, 2)
    wts = wts.reshape(nc, -1)
    m = np.empty(pts.shape[:2] + (3,))
    m[..., 0] = 1.0
    m[..., 1:] = (pts - centroids[:, None, :]) / h[..., None]
    H = _sym(np.einsum("cq,cqa,cqb->cab", wts, m, m))

    Gt = G.copy()
    Gt[:, 0, :] = 0.0
    PiT = np.swapaxes(Pi_star, 1, 2)
    R = np.eye(n) - Pi_dof
    S = np.swapaxes(R, 1, 2) @ R
    K = _sym(PiT @ Gt @ Pi_star + S)
    Mbar = _sym(PiT @ H @ Pi_star)
    M = _sym(Mbar + areas[:, None, None] * S)
    return OperatorBatch(
        cell_ids=np.asarray(cell_ids),
        dofs=np.asarray(dofs),
        centroids=centroids,
        diameters=diameters,
        areas=areas,
        D=D,
        B=B,
        G=G,
        H=H,
        Pi_star=Pi_star,
        Pi_dof=Pi_dof,
        K=K,
        M=M,
        Mbar=Mbar,
    )


def mesh_batches(mesh: PolygonalMesh) -> list[OperatorBatch]:
    """Operator batches covering every cell of ``mesh``, ordered by vertex count."""
    sizes = np.array([len(c) for c in mesh.cells])
    batches = []
    for n in np.unique(sizes):
        ids = np.flatnonzero(sizes == n)
        dofs = np.stack([mesh.cells[i] for i in ids])
        batches.append(
            build_batch(
                mesh.vertices[dofs],
                mesh.centroids[ids],
                mesh.diameters[ids],
                mesh.areas[ids],
                cell_ids=ids,
                dofs=dofs,
            )
        )
    return batches


def _single(cell, vertices) -> OperatorBatch:
    vertices = np.asarray(vertices, dtype=float)
    cell = np.asarray(cell)
    area, centroid, diameter = cell_geometry(vertices, cell)
    return build_batch(
        vertices[cell][None], centroid[None], np.array([diameter]), np.array([area]), dofs=cell[None]
    )


def build_operators(cell, vertices) -> LocalOperators:
    """Projection operators of one counter-clockwise cell."""
    return _single(cell, vertices).operators(0)


def local_stiffness(ops: LocalOperators) -> np.ndarray:
    R = np.eye(len(ops.D)) - ops.Pi_dof
    return _sym(ops.Pi_star.T @ ops.Gtilde @ ops.Pi_star + R.T @ R)


def local_projected_mass(ops: LocalOperators) -> np.ndarray:
    return _sym(ops.Pi_star.T @ ops.H @ ops.Pi_star)


def local_mass(ops: LocalOperators, area: float | None = None) -> np.ndarray:
    area = ops.area if area is None else area
    R = np.eye(len(ops.D)) - ops.Pi_dof
    return _sym(local_projected_mass(ops) + area * (R.T @ R))


def local_matrices(cell, vertices) -> LocalMatrices:
    return _single(cell, vertices).matrices(0)
