"""
Quadrature on polygons by sub-triangulation.

Cells are split into a fan of triangles around their centroid; when a fan
triangle would have non-positive area (the centroid does not see the whole
boundary) the cell is ear-clipped instead. Each triangle carries a symmetric
Gauss rule with positive weights.
"""

from __future__ import annotations

import numpy as np

from .mesh import cell_geometry

# Symmetric triangle rules in barycentric coordinates, weights summing to 1.
# Degree 4 and 5 are the Dunavant rules.
_A4, _B4 = 0.445948490915965, 0.091576213509771
_W4a, _W4b = 0.223381589678011, 0.109951743655322
_A5, _B5 = 0.470142064105115, 0.101286507323456
_W5a, _W5b = 0.132394152788506, 0.125939180544827


def _orbit(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]), np.full(3, 1 / 3)),
    4: (np.array(_orbit(_A4) + _orbit(_B4)), np.array([_W4a] * 3 + [_W4b] * 3)),
    5: (
        np.array([(1 / 3, 1 / 3, 1 / 3)] + _orbit(_A5) + _orbit(_B5)),
        np.array([0.225] + [_W5a] * 3 + [_W5b] * 3),
    ),
}
_RULES[3] = _RULES[4]

# Dunavant tables are given to 15 digits; renormalise so weights sum to 1 exactly.
for _deg, (_bary, _w) in list(_RULES.items()):
    _RULES[_deg] = (_bary / _bary.sum(1, keepdims=True), _w / _w.sum())


class TriangulationError(ValueError):
    pass


def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (nq, 3) and weights (nq,) summing to 1, exact to ``degree``."""
    if degree < 1:
        raise ValueError("degree must be positive")
    if degree > 5:
        raise ValueError("triangle rules are tabulated up to degree 5")
    return _RULES[degree]


def _cross(o, a, b):
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])


def ear_clip(xy: np.ndarray) -> np.ndarray:
    """
    Triangulate a simple counter-clockwise polygon.

    Returns an (n - 2, 3) array of local vertex indices.
    """
    n = len(xy)
    idx = list(range(n))
    tris = []
    scale = np.ptp(xy, axis=0).max() ** 2
    guard = 0
    while len(idx) > 3:
        m = len(idx)
        for k in range(m):
            i, j, l = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = xy[i], xy[j], xy[l]
            if _cross(a, b, c) <= 1e-14 * scale:
                continue
            inside = False
            for q in idx:
                if q in (i, j, l):
                    continue
                p = xy[q]
                if _cross(a, b, p) >= 0 and _cross(b, c, p) >= 0 and _cross(c, a, p) >= 0:
                    inside = True
                    break
            if not inside:
                tris.append((i, j, l))
                idx.pop(k)
                break
        else:
            raise TriangulationError("no ear found; polygon is not simple")
        guard += 1
        if guard > 4 * n:
            raise TriangulationError("ear clipping did not terminate")
    tris.append(tuple(idx))
    return np.array(tris)


def batched_triangles(xy: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """
    Sub-triangles for a batch of cells with the same vertex count.

    Parameters
    ----------
    xy : (nc, n, 2) array
    centroids : (nc, 2) array

    Returns
    -------
    (nc, n, 3, 2) array
        ``n`` triangles per cell. Cells that need ear clipping get ``n - 2``
        real triangles padded with two degenerate ones (zero area).
    """
    nxt = np.roll(xy, -1, axis=1)
    c = np.broadcast_to(centroids[:, None, :], xy.shape)
    tris = np.stack([c, xy, nxt], axis=2)
    area2 = _cross(c, xy, nxt)
    scale = np.ptp(xy, axis=1).max(-1) ** 2
    bad = np.flatnonzero(np.any(area2 <= 1e-12 * scale[:, None], axis=1))
    for k in bad:
        ear = ear_clip(xy[k])
        t = xy[k][ear]
        pad = np.repeat(t[:1, :1, :], 2, axis=0).repeat(3, axis=1)
        tris[k] = np.concatenate([t, pad])
    return tris


def triangles_rule(tris: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Map a triangle rule onto triangles.

    Parameters
    ----------
    tris : (..., 3, 2) array of triangle corners

    Returns
    -------
    points : (..., nq, 2)
    weights : (..., nq)
    """
    bary, w = triangle_rule(degree)
    area = 0.5 * np.abs(_cross(tris[..., 0, :], tris[..., 1, :], tris[..., 2, :]))
    points = np.einsum("qv,...vd->...qd", bary, tris)
    weights = area[..., None] * w
    return points, weights


def polygon_quadrature(xy: np.ndarray, degree: int = 2, centroid: np.ndarray | None = None):
    """
    Quadrature rule on a simple counter-clockwise polygon.

    Parameters
    ----------
    xy : (n, 2) array
        Polygon vertices.
    degree : int
        Polynomial degree integrated exactly.
    centroid : (2,) array, optional
        Fan centre; the polygon centroid by default.

    Returns
    -------
    points : (nq, 2) array
    weights : (nq,) array
    """
    xy = np.asarray(xy, dtype=float)
    if centroid is None:
        _, centroid, _ = cell_geometry(xy, np.arange(len(xy)))
    tris = batched_triangles(xy[None], np.asarray(centroid, dtype=float)[None])[0]
    points, weights = triangles_rule(tris, degree)
    return points.reshape(-1, 2), weights.reshape(-1)
