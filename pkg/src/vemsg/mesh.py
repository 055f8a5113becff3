"""
Polygonal meshes of rectangles.

Three families are generated: clipped (optionally Lloyd-smoothed) Voronoi
tessellations, randomly distorted quadrilateral grids and structured grids of
concave hexagons. Structured triangle grids are available for comparison runs.

A mesh is stored as a vertex array plus a list of counter-clockwise vertex
index arrays, one per cell. Per-cell geometry (area, centroid, diameter) is
computed once at construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Voronoi, cKDTree


class MeshError(ValueError):
    """Invalid mesh parameters or geometry."""


class InvertedCellError(MeshError):
    def __init__(self, cell_id: int, message: str = ""):
        self.cell_id = cell_id
        super().__init__(message or f"cell {cell_id} is inverted or self-intersecting")


class MeshFormatError(MeshError):
    """Malformed mesh file; carries the offending line and column."""

    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


@dataclass(frozen=True)
class MeshQualityReport:
    min_star_ratio: float
    min_edge_ratio: float
    worst_cell_id: int


def signed_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Proper intersection test for two segments (shared endpoints excluded)."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def is_simple(xy: np.ndarray) -> bool:
    n = len(xy)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_intersect(xy[i], xy[(i + 1) % n], xy[j], xy[(j + 1) % n]):
                return False
    return True


def cell_geometry(vertices: np.ndarray, cell: Sequence[int]) -> tuple[float, np.ndarray, float]:
    """
    Area, centroid and diameter of one polygonal cell.

    Parameters
    ----------
    vertices : (n, 2) array
        Global vertex coordinates.
    cell : sequence of int
        Counter-clockwise vertex indices.

    Returns
    -------
    area : float
    centroid : (2,) array
    diameter : float
        Largest distance between two vertices of the cell.

    Raises
    ------
    MeshError
        If the polygon is clockwise, degenerate or self-intersecting.
    """
    xy = np.asarray(vertices, dtype=float)[np.asarray(cell)]
    if len(xy) < 3:
        raise MeshError("a cell needs at least 3 vertices")
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if not area > 0:
        raise MeshError(f"polygon has non-positive signed area {area:.3e} (clockwise or degenerate)")
    if len(xy) > 3 and not is_simple(xy):
        raise MeshError("polygon is self-intersecting")
    cx = np.dot(x + xn, cross) / (6.0 * area)
    cy = np.dot(y + yn, cross) / (6.0 * area)
    diff = xy[:, None, :] - xy[None, :, :]
    diameter = float(np.sqrt((diff**2).sum(-1)).max())
    return float(area), np.array([cx, cy]), diameter


def _batched_geometry(vertices: np.ndarray, cells: list[np.ndarray]):
    areas = np.empty(len(cells))
    centroids = np.empty((len(cells), 2))
    diameters = np.empty(len(cells))
    sizes = np.array([len(c) for c in cells])
    for n in np.unique(sizes):
        ids = np.flatnonzero(sizes == n)
        xy = vertices[np.stack([cells[i] for i in ids])]
        x, y = xy[..., 0], xy[..., 1]
        xn, yn = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
        cross = x * yn - xn * y
        a = 0.5 * cross.sum(1)
        areas[ids] = a
        with np.errstate(divide="ignore", invalid="ignore"):
            centroids[ids, 0] = ((x + xn) * cross).sum(1) / (6.0 * a)
            centroids[ids, 1] = ((y + yn) * cross).sum(1) / (6.0 * a)
        diff = xy[:, :, None, :] - xy[:, None, :, :]
        diameters[ids] = np.sqrt((diff**2).sum(-1)).max(axis=(1, 2))
    return areas, centroids, diameters


@dataclass(frozen=True, eq=False)
class PolygonalMesh:
    """
    Conforming polygonal mesh of an axis-aligned rectangle.

    Vertices lying on the rectangle perimeter are flagged as boundary
    vertices. Instances are treated as immutable.
    """

    vertices: np.ndarray
    cells: list
    boundary_vertex_flags: np.ndarray
    domain_rect: tuple
    areas: np.ndarray = field(repr=False, default=None)
    centroids: np.ndarray = field(repr=False, default=None)
    diameters: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float)
        cells = [np.asarray(c, dtype=np.int64) for c in self.cells]
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "boundary_vertex_flags", np.asarray(self.boundary_vertex_flags, dtype=bool))
        object.__setattr__(self, "domain_rect", tuple(float(v) for v in self.domain_rect))
        if self.areas is None:
            areas, centroids, diameters = _batched_geometry(vertices, cells)
            object.__setattr__(self, "areas", areas)
            object.__setattr__(self, "centroids", centroids)
            object.__setattr__(self, "diameters", diameters)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def mesh_size(self) -> float:
        return float(self.diameters.max())

    @property
    def domain_area(self) -> float:
        xmin, xmax, ymin, ymax = self.domain_rect
        return (xmax - xmin) * (ymax - ymin)

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_vertex_flags)

    @property
    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_vertex_flags)

    def cell_xy(self, k: int) -> np.ndarray:
        return self.vertices[self.cells[k]]

    def validate(self) -> None:
        """
        Check connectivity, orientation, boundary flags and tiling.

        Raises
        ------
        MeshError
            Naming the first offending cell or vertex.
        """
        nv = self.n_vertices
        for k, c in enumerate(self.cells):
            if len(c) < 3:
                raise MeshError(f"cell {k} has fewer than 3 vertices")
            if c.min() < 0 or c.max() >= nv:
                raise MeshError(f"cell {k} references a vertex index out of range [0, {nv})")
            if np.any(c == np.roll(c, -1)):
                raise MeshError(f"cell {k} repeats a vertex consecutively")
            if not self.areas[k] > 0:
                raise InvertedCellError(k)
        on_boundary = on_rectangle_boundary(self.vertices, self.domain_rect)
        bad = np.flatnonzero(on_boundary != self.boundary_vertex_flags)
        if len(bad):
            raise MeshError(f"vertex {bad[0]} has an inconsistent boundary flag")
        total = self.areas.sum()
        if abs(total - self.domain_area) > 1e-10 * self.domain_area:
            raise MeshError(f"cell areas sum to {total!r}, domain area is {self.domain_area!r}")


def on_rectangle_boundary(points: np.ndarray, rect, rtol: float = 1e-10) -> np.ndarray:
    xmin, xmax, ymin, ymax = rect
    tol = rtol * max(xmax - xmin, ymax - ymin)
    x, y = points[:, 0], points[:, 1]
    return (
        (np.abs(x - xmin) <= tol)
        | (np.abs(x - xmax) <= tol)
        | (np.abs(y - ymin) <= tol)
        | (np.abs(y - ymax) <= tol)
    )


def _check_rect(rect) -> tuple:
    xmin, xmax, ymin, ymax = (float(v) for v in rect)
    if not (np.isfinite([xmin, xmax, ymin, ymax]).all() and xmax > xmin and ymax > ymin):
        raise MeshError(f"degenerate rectangle {rect!r}")
    return xmin, xmax, ymin, ymax


# ---------------------------------------------------------------------------
# Voronoi
# ---------------------------------------------------------------------------


def _mirror(seeds: np.ndarray, rect, band: float = np.inf) -> np.ndarray:
    """Seeds followed by their reflections across each side closer than ``band``."""
    xmin, xmax, ymin, ymax = rect
    x, y = seeds[:, 0], seeds[:, 1]
    parts = [seeds]
    for near, refl in (
        (x - xmin < band, lambda p: np.column_stack([2 * xmin - p[:, 0], p[:, 1]])),
        (xmax - x < band, lambda p: np.column_stack([2 * xmax - p[:, 0], p[:, 1]])),
        (y - ymin < band, lambda p: np.column_stack([p[:, 0], 2 * ymin - p[:, 1]])),
        (ymax - y < band, lambda p: np.column_stack([p[:, 0], 2 * ymax - p[:, 1]])),
    ):
        parts.append(refl(seeds[near]))
    return np.concatenate(parts)


def _voronoi_regions(seeds, rect, band):
    """Regions of the original seeds, or None if some region leaks out of ``rect``."""
    xmin, xmax, ymin, ymax = rect
    vor = Voronoi(_mirror(seeds, rect, band))
    regions = []
    for i in range(len(seeds)):
        reg = vor.regions[vor.point_region[i]]
        if len(reg) < 3 or -1 in reg:
            return None
        regions.append(np.asarray(reg))
    used = np.unique(np.concatenate(regions))
    v = vor.vertices[used]
    tol = 1e-9 * max(xmax - xmin, ymax - ymin)
    if (
        v[:, 0].min() < xmin - tol
        or v[:, 0].max() > xmax + tol
        or v[:, 1].min() < ymin - tol
        or v[:, 1].max() > ymax + tol
    ):
        return None
    return vor.vertices, regions, used


def _clipped_voronoi(seeds: np.ndarray, rect):
    """
    Voronoi cells of ``seeds`` clipped to ``rect``.

    The seeds are reflected across the four sides; the bisector between a seed
    and its reflection is the side itself and a reflection is never closer to
    an interior point than its seed, so the cells of the original seeds are
    exactly the clipped cells.
    """
    xmin, xmax, ymin, ymax = rect
    scale = max(xmax - xmin, ymax - ymin)
    # Only seeds near a side need reflecting; a region reaching outside the
    # rectangle means the band was too narrow, so retry with every seed.
    spacing = np.sqrt((xmax - xmin) * (ymax - ymin) / len(seeds))
    result = _voronoi_regions(seeds, rect, 4.0 * spacing)
    if result is None:
        result = _voronoi_regions(seeds, rect, np.inf)
    if result is None:
        raise MeshError("Voronoi construction produced an unbounded cell")
    verts, regions, used = result
    # snap near-boundary vertices onto the perimeter
    snap = 1e-9 * scale
    v = verts[used]
    for col, lo, hi in ((0, xmin, xmax), (1, ymin, ymax)):
        v[np.abs(v[:, col] - lo) < snap, col] = lo
        v[np.abs(v[:, col] - hi) < snap, col] = hi
        np.clip(v[:, col], lo, hi, out=v[:, col])

    # merge coincident vertices (cocircular seeds)
    pairs = cKDTree(v).query_pairs(1e-10 * scale, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(v), len(v)))
    n_comp, label = connected_components(graph, directed=False)
    first = np.full(n_comp, len(v))
    np.minimum.at(first, label, np.arange(len(v)))
    order = np.argsort(first)
    rank = np.empty(n_comp, dtype=np.int64)
    rank[order] = np.arange(n_comp)
    old_to_new = np.full(len(verts), -1)
    old_to_new[used] = rank[label]
    vertices = v[first[order]]

    cells = []
    for reg in regions:
        c = old_to_new[reg]
        if n_comp < len(v):
            # drop consecutive duplicates produced by merging
            c = c[c != np.roll(c, 1)]
        cells.append(c)
    areas, _, _ = _batched_geometry(vertices, cells)
    for k in np.flatnonzero(areas < 0):
        cells[k] = cells[k][::-1]
    return vertices, cells


def _cell_centroids(vertices, cells):
    _, centroids, _ = _batched_geometry(vertices, cells)
    return centroids


def generate_voronoi(
    domain_rect,
    n_cells: int,
    lloyd_iterations: int = 0,
    rng_seed: int = 0,
    seeds: np.ndarray | None = None,
) -> PolygonalMesh:
    """
    Clipped Voronoi mesh of a rectangle, optionally smoothed by Lloyd iterations.

    Parameters
    ----------
    domain_rect : (xmin, xmax, ymin, ymax)
    n_cells : int
        Number of seeds (cells), at least 4.
    lloyd_iterations : int
        Number of times each seed is moved to the centroid of its cell.
    rng_seed : int
        Seed for the uniform random initial seeds.
    seeds : (n_cells, 2) array, optional
        Explicit initial seeds; overrides the random draw.
    """
    rect = _check_rect(domain_rect)
    xmin, xmax, ymin, ymax = rect
    if seeds is None:
        if n_cells < 4:
            raise MeshError("n_cells must be at least 4")
        rng = np.random.default_rng(rng_seed)
        pts = rng.random((n_cells, 2))
        pts[:, 0] = xmin + (xmax - xmin) * pts[:, 0]
        pts[:, 1] = ymin + (ymax - ymin) * pts[:, 1]
    else:
        pts = np.array(seeds, dtype=float)
        if len(pts) < 4:
            raise MeshError("n_cells must be at least 4")
    if lloyd_iterations < 0:
        raise MeshError("lloyd_iterations must be non-negative")

    vertices, cells = _clipped_voronoi(pts, rect)
    for _ in range(lloyd_iterations):
        pts = _cell_centroids(vertices, cells)
        vertices, cells = _clipped_voronoi(pts, rect)
    flags = on_rectangle_boundary(vertices, rect)
    return PolygonalMesh(vertices, cells, flags, rect)


# ---------------------------------------------------------------------------
# Structured families
# ---------------------------------------------------------------------------


def _grid_nodes(nx, ny, rect):
    xmin, xmax, ymin, ymax = rect
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def generate_distorted_quads(
    nx: int, ny: int, distortion: float = 0.0, rng_seed: int = 0, domain_rect=(0.0, 1.0, 0.0, 1.0)
) -> PolygonalMesh:
    """
    Structured quadrilateral grid with randomly perturbed interior nodes.

    Each interior node moves by up to ``distortion`` times the local cell
    width in each coordinate. Boundary nodes stay put.

    Raises
    ------
    InvertedCellError
        If the perturbation produces a non-simple or inverted quadrilateral.
    """
    if nx < 2 or ny < 2:
        raise MeshError("nx and ny must be at least 2")
    if not 0.0 <= distortion < 0.5:
        raise MeshError("distortion must lie in [0, 0.5)")
    rect = _check_rect(domain_rect)
    xmin, xmax, ymin, ymax = rect
    pts = _grid_nodes(nx, ny, rect)
    flags = on_rectangle_boundary(pts, rect)
    rng = np.random.default_rng(rng_seed)
    shift = rng.uniform(-1.0, 1.0, size=pts.shape)
    shift[:, 0] *= distortion * (xmax - xmin) / nx
    shift[:, 1] *= distortion * (ymax - ymin) / ny
    shift[flags] = 0.0
    pts = pts + shift

    cells = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            cells.append(np.array([a, a + 1, a + nx + 2, a + nx + 1]))
    for k, c in enumerate(cells):
        xy = pts[c]
        if not (signed_area(xy) > 0 and is_simple(xy)):
            raise InvertedCellError(k, f"distortion {distortion} inverted cell {k}")
    return PolygonalMesh(pts, cells, flags, rect)


# zigzag cut of the unit square, point-symmetric about its centre
_ZIGZAG = np.array([[0.5, 0.0], [0.3, 0.35], [0.7, 0.65], [0.5, 1.0]])


def generate_nonconvex(nx: int, ny: int, domain_rect=(0.0, 1.0, 0.0, 1.0)) -> PolygonalMesh:
    """
    Grid of squares, each split by a zigzag cut into two congruent concave hexagons.

    The cut runs from the midpoint of the bottom side to the midpoint of the
    top side, so neighbouring squares share the cut endpoints and the mesh is
    conforming.
    """
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be at least 1")
    rect = _check_rect(domain_rect)
    xmin, xmax, ymin, ymax = rect
    dx = (xmax - xmin) / nx
    dy = (ymax - ymin) / ny

    index = {}
    verts = []

    def vid(key, x, y):
        if key not in index:
            index[key] = len(verts)
            verts.append((x, y))
        return index[key]

    cells = []
    for j in range(ny):
        for i in range(nx):
            x0, y0 = xmin + i * dx, ymin + j * dy
            # integer keys on a half-step lattice keep shared vertices exact
            ll = vid(("g", 2 * i, 2 * j), x0, y0)
            lr = vid(("g", 2 * i + 2, 2 * j), x0 + dx, y0)
            ur = vid(("g", 2 * i + 2, 2 * j + 2), x0 + dx, y0 + dy)
            ul = vid(("g", 2 * i, 2 * j + 2), x0, y0 + dy)
            bm = vid(("g", 2 * i + 1, 2 * j), x0 + 0.5 * dx, y0)
            tm = vid(("g", 2 * i + 1, 2 * j + 2), x0 + 0.5 * dx, y0 + dy)
            p1 = vid(("z1", i, j), x0 + _ZIGZAG[1, 0] * dx, y0 + _ZIGZAG[1, 1] * dy)
            p2 = vid(("z2", i, j), x0 + _ZIGZAG[2, 0] * dx, y0 + _ZIGZAG[2, 1] * dy)
            cells.append(np.array([ll, bm, p1, p2, tm, ul]))
            cells.append(np.array([bm, lr, ur, tm, p2, p1]))
    pts = np.array(verts)
    flags = on_rectangle_boundary(pts, rect)
    return PolygonalMesh(pts, cells, flags, rect)


def generate_triangles(nx: int, ny: int, domain_rect=(0.0, 1.0, 0.0, 1.0)) -> PolygonalMesh:
    """Structured grid with every square split into two triangles along the diagonal."""
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be at least 1")
    rect = _check_rect(domain_rect)
    pts = _grid_nodes(nx, ny, rect)
    cells = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b, c, d = a + 1, a + nx + 2, a + nx + 1
            cells.append(np.array([a, b, c]))
            cells.append(np.array([a, c, d]))
    return PolygonalMesh(pts, cells, on_rectangle_boundary(pts, rect), rect)


def single_cell_mesh(xy) -> PolygonalMesh:
    """Mesh made of one convex polygon; its bounding box is the domain."""
    xy = np.asarray(xy, dtype=float)
    rect = (xy[:, 0].min(), xy[:, 0].max(), xy[:, 1].min(), xy[:, 1].max())
    return PolygonalMesh(xy, [np.arange(len(xy))], on_rectangle_boundary(xy, rect), rect)


# ---------------------------------------------------------------------------
# Quality
# ---------------------------------------------------------------------------


def _star_radius(xy: np.ndarray, centroid: np.ndarray) -> float:
    """Largest inscribed kernel ball over sampled candidate centres (0 if none visible)."""
    nxt = np.roll(xy, -1, axis=0)
    edge = nxt - xy
    length = np.hypot(edge[:, 0], edge[:, 1])
    # inward unit normals for a CCW polygon
    normal = np.column_stack([-edge[:, 1], edge[:, 0]]) / length[:, None]

    lo, hi = xy.min(0), xy.max(0)
    g = np.linspace(0.05, 0.95, 7)
    gx, gy = np.meshgrid(lo[0] + g * (hi[0] - lo[0]), lo[1] + g * (hi[1] - lo[1]))
    candidates = np.concatenate(
        [centroid[None, :], 0.5 * (xy + centroid), np.column_stack([gx.ravel(), gy.ravel()])]
    )
    # signed distance of each candidate to each edge line, positive inside
    dist = ((candidates[:, None, :] - xy[None, :, :]) * normal[None, :, :]).sum(-1)
    return max(float(dist.min(axis=1).max()), 0.0)


def check_regularity(mesh: PolygonalMesh) -> MeshQualityReport:
    """
    Mesh-regularity diagnostics.

    ``min_edge_ratio`` is the smallest ratio of vertex-pair distance to cell
    diameter. ``min_star_ratio`` is the smallest ratio of an inscribed kernel
    ball radius to cell diameter, where the ball centre is searched over a
    sample of candidate points (a lower bound for the exact value).
    """
    edge_ratios = np.empty(mesh.n_cells)
    star_ratios = np.empty(mesh.n_cells)
    for k in range(mesh.n_cells):
        xy = mesh.cell_xy(k)
        d = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1))
        n = len(xy)
        dmin = d[np.triu_indices(n, 1)].min()
        edge_ratios[k] = dmin / mesh.diameters[k]
        star_ratios[k] = _star_radius(xy, mesh.centroids[k]) / mesh.diameters[k]
    worst = int(np.argmin(np.minimum(edge_ratios, star_ratios)))
    return MeshQualityReport(float(star_ratios.min()), float(edge_ratios.min()), worst)


# ---------------------------------------------------------------------------
# Text I/O
# ---------------------------------------------------------------------------

MESH_HEADER = "polymesh 1"


def write_mesh(mesh: PolygonalMesh, path) -> None:
    """
    Write ``mesh`` in the plain-text ``polymesh 1`` format::

        polymesh 1
        <xmin> <xmax> <ymin> <ymax>
        <n_vertices>
        <x> <y> <flag>          (one line per vertex)
        <n_cells>
        <n> <i1> ... <in>       (one line per cell, 0-based, CCW)
    """
    lines = [MESH_HEADER, " ".join(repr(float(v)) for v in mesh.domain_rect), str(mesh.n_vertices)]
    lines += [f"{x!r} {y!r} {int(f)}" for (x, y), f in zip(mesh.vertices.tolist(), mesh.boundary_vertex_flags)]
    lines.append(str(mesh.n_cells))
    lines += [" ".join([str(len(c))] + [str(int(i)) for i in c]) for c in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n")


def _columns(line: str) -> list[int]:
    return [m.start() + 1 for m in re.finditer(r"\S+", line)]


def _tokens(line: str, lineno: int, count: int | None, conv, what: str):
    parts = line.split()
    if count is not None and len(parts) != count:
        raise MeshFormatError(f"expected {count} fields for {what}, found {len(parts)}", lineno)
    out = []
    for tok, col in zip(parts, _columns(line)):
        try:
            out.append(conv(tok))
        except ValueError:
            raise MeshFormatError(f"cannot parse {tok!r} in {what}", lineno, col) from None
    return out


def read_mesh(path) -> PolygonalMesh:
    """Read a ``polymesh 1`` file written by :func:`write_mesh`."""
    raw = Path(path).read_text().splitlines()
    it = iter(enumerate(raw, start=1))

    def next_line(what):
        for lineno, line in it:
            if line.strip() and not line.lstrip().startswith("#"):
                return lineno, line
        raise MeshFormatError(f"unexpected end of file while reading {what}", len(raw) + 1)

    lineno, line = next_line("header")
    if line.strip() != MESH_HEADER:
        raise MeshFormatError(f"expected header {MESH_HEADER!r}", lineno)
    lineno, line = next_line("domain rectangle")
    rect = _tokens(line, lineno, 4, float, "domain rectangle")
    lineno, line = next_line("vertex count")
    (nv,) = _tokens(line, lineno, 1, int, "vertex count")
    verts = np.empty((nv, 2))
    flags = np.empty(nv, dtype=bool)
    for i in range(nv):
        lineno, line = next_line(f"vertex {i}")
        x, y, f = _tokens(line, lineno, 3, float, f"vertex {i}")
        verts[i] = x, y
        flags[i] = bool(f)
    lineno, line = next_line("cell count")
    (nc,) = _tokens(line, lineno, 1, int, "cell count")
    cells = []
    for k in range(nc):
        lineno, line = next_line(f"cell {k}")
        vals = _tokens(line, lineno, None, int, f"cell {k}")
        if not vals or vals[0] != len(vals) - 1:
            raise MeshFormatError(f"cell {k}: vertex count does not match the number of indices", lineno)
        ids = np.array(vals[1:])
        bad = np.flatnonzero((ids < 0) | (ids >= nv))
        if len(bad):
            col = _columns(line)[bad[0] + 1]
            raise MeshFormatError(f"cell {k}: vertex index {ids[bad[0]]} out of range [0, {nv})", lineno, col)
        cells.append(ids)
    return PolygonalMesh(verts, cells, flags, tuple(rect))
