"""Meshes of rectangles and triangles with oriented edges and affine cell maps.

Global edge orientation always runs from the lower to the higher vertex
index.  Local edges follow the reference elements:

* quads ``(v0, v1, v2, v3)`` counterclockwise from the lower-left corner, local
  edges ``(0,1), (1,2), (3,2), (0,3)`` (tangents along +x and +y);
* triangles ``(v0, v1, v2)`` counterclockwise, local edges ``(0,1), (1,2), (2,0)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

QUAD = "quad"
TRI = "tri"

LOCAL_EDGES = {
    QUAD: ((0, 1), (1, 2), (3, 2), (0, 3)),
    TRI: ((0, 1), (1, 2), (2, 0)),
}

LSHAPE_CORNER = (0.5, 0.5)


class SingularMapError(ValueError):
    pass


@dataclass(frozen=True)
class AffineMap:
    """``F(xh) = B @ xh + b``."""

    B: np.ndarray
    b: np.ndarray
    det_B: float

    def __call__(self, xh: np.ndarray) -> np.ndarray:
        return np.asarray(xh) @ self.B.T + self.b

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.B, (np.asarray(x) - self.b).T).T


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray  # (nv, 2)
    cells: np.ndarray  # (nc, 3 or 4), counterclockwise
    edges: np.ndarray  # (ne, 2), low index first
    cell_edges: np.ndarray  # (nc, n_local_edges) global edge ids
    cell_edge_signs: np.ndarray  # +1 where the local edge runs along the global one
    boundary_vertices: np.ndarray  # bool (nv,)
    boundary_edges: np.ndarray  # bool (ne,)
    kind: str
    parent: np.ndarray | None = None  # coarse cell of each cell after refinement

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def local_edges(self) -> tuple[tuple[int, int], ...]:
        return LOCAL_EDGES[self.kind]

    def h(self) -> float:
        """Largest edge length."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return float(np.sqrt((d**2).sum(axis=1)).max())

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.cells]
        x, y = p[..., 0], p[..., 1]
        return 0.5 * (np.sum(x * np.roll(y, -1, axis=1), axis=1) - np.sum(np.roll(x, -1, axis=1) * y, axis=1))

    def affine_maps(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stacked ``B`` (nc,2,2), ``b`` (nc,2) and ``det B`` (nc,) for all cells."""
        p = self.vertices[self.cells]
        if self.kind == QUAD:
            # (-1,1)^2 -> [x0,x1] x [y0,y1]; v0 lower-left, v2 upper-right
            half = 0.5 * (p[:, 2] - p[:, 0])
            B = np.zeros((len(p), 2, 2))
            B[:, 0, 0] = half[:, 0]
            B[:, 1, 1] = half[:, 1]
            b = 0.5 * (p[:, 0] + p[:, 2])
        else:
            B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
            b = p[:, 0].copy()
        det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
        return B, b, det

    def dump(self, fh: TextIO) -> None:
        """Write ``v x y`` and ``c i j k [l]`` lines."""
        for x, y in self.vertices:
            fh.write(f"v {x:.17g} {y:.17g}\n")
        for c in self.cells:
            fh.write("c " + " ".join(str(int(i)) for i in c) + "\n")


def affine_map(mesh: Mesh2D, cell: int) -> AffineMap:
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell {cell} out of range for a mesh with {mesh.n_cells} cells")
    B, b, det = mesh.affine_maps()
    scale = max(float(np.abs(B[cell]).max()), np.finfo(float).tiny)
    if abs(det[cell]) <= 1e-14 * scale**2:
        raise SingularMapError(f"cell {cell} is degenerate (det B = {det[cell]:.3e})")
    if mesh.kind == QUAD and (B[cell, 0, 1] != 0.0 or B[cell, 1, 0] != 0.0):
        raise SingularMapError("quad cells must be axis-aligned rectangles")
    return AffineMap(B[cell].copy(), b[cell].copy(), float(det[cell]))


def build_mesh(vertices, cells, kind: str, parent=None) -> Mesh2D:
    """Derive edges, orientation signs and boundary flags from a cell list."""
    vertices = np.asarray(vertices, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    local = np.array(LOCAL_EDGES[kind])
    ends = cells[:, local]  # (nc, nle, 2)
    lo = ends.min(axis=2)
    hi = ends.max(axis=2)
    pairs = np.stack([lo.ravel(), hi.ravel()], axis=1)
    edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
    cell_edges = inverse.reshape(lo.shape)
    signs = np.where(ends[..., 0] < ends[..., 1], 1, -1).astype(np.int8)
    boundary_edges = counts == 1
    boundary_vertices = np.zeros(len(vertices), dtype=bool)
    boundary_vertices[edges[boundary_edges].ravel()] = True
    return Mesh2D(vertices, cells, edges, cell_edges, signs, boundary_vertices, boundary_edges, kind,
                  None if parent is None else np.asarray(parent, dtype=np.int64))


def _grid(N: int):
    if N < 1:
        raise ValueError(f"need N >= 1, got {N}")
    t = np.linspace(0.0, 1.0, N + 1)
    xx, yy = np.meshgrid(t, t, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
    v0 = (j * (N + 1) + i).ravel()
    return vertices, v0, v0 + 1, v0 + N + 2, v0 + N + 1


def uniform_rect_mesh(N: int) -> Mesh2D:
    """``N x N`` squares on the unit square."""
    vertices, a, b, c, d = _grid(N)
    return build_mesh(vertices, np.column_stack([a, b, c, d]), QUAD)


def uniform_tri_mesh(N: int) -> Mesh2D:
    """``N x N`` squares, each cut by its lower-left to upper-right diagonal."""
    vertices, a, b, c, d = _grid(N)
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return build_mesh(vertices, cells, TRI)


def lshape_initial_mesh() -> Mesh2D:
    """Six triangles on (0,1)^2 minus [0.5,1)x(0,0.5], diagonals through the reentrant corner."""
    vertices = np.array([
        [0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5],
        [1.0, 0.5], [0.0, 1.0], [0.5, 1.0], [1.0, 1.0],
    ])
    cells = np.array([
        [0, 1, 3], [0, 3, 2],  # lower-left square
        [2, 3, 5], [3, 6, 5],  # upper-left square
        [3, 4, 7], [3, 7, 6],  # upper-right square
    ])
    return build_mesh(vertices, cells, TRI)


def refine_graded(mesh: Mesh2D, kappa: float, corner=LSHAPE_CORNER) -> Mesh2D:
    """Split every triangle four ways.

    Edges touching ``corner`` are cut at distance ``kappa * length`` from it;
    every other edge is cut at its midpoint.
    """
    if mesh.kind != TRI:
        raise ValueError("graded refinement is defined for triangle meshes")
    corner = np.asarray(corner, dtype=float)
    V = mesh.vertices
    at_corner = np.all(np.abs(V - corner) < 1e-14, axis=1)
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    t = np.full(mesh.n_edges, 0.5)
    t[at_corner[a]] = kappa
    t[at_corner[b]] = 1.0 - kappa
    new_points = V[a] + t[:, None] * (V[b] - V[a])
    nv = mesh.n_vertices
    vertices = np.vstack([V, new_points])
    m = nv + mesh.cell_edges  # (nc, 3): points on local edges (0,1), (1,2), (2,0)
    v = mesh.cells
    children = np.stack([
        np.column_stack([v[:, 0], m[:, 0], m[:, 2]]),
        np.column_stack([m[:, 0], v[:, 1], m[:, 1]]),
        np.column_stack([m[:, 2], m[:, 1], v[:, 2]]),
        np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
    ], axis=1).reshape(-1, 3)
    parent = np.repeat(np.arange(mesh.n_cells), 4)
    return build_mesh(vertices, children, TRI, parent)


def graded_lshape_mesh(n: int, kappa: float) -> Mesh2D:
    """The six-triangle L-shape mesh refined ``n`` times toward the reentrant corner.

    ``kappa = 0.5`` gives uniform refinement.  ``parent`` links each cell to its
    cell on level ``n - 1``.
    """
    if not (0.0 < kappa <= 0.5):
        raise ValueError(f"grading parameter must lie in (0, 0.5], got {kappa}")
    if n < 0:
        raise ValueError(f"refinement level must be >= 0, got {n}")
    mesh = lshape_initial_mesh()
    for _ in range(n):
        mesh = refine_graded(mesh, kappa)
    return mesh


def audit(mesh: Mesh2D) -> list[str]:
    """Return the list of violated validity conditions (empty if the mesh is fine)."""
    problems = []
    if np.any(mesh.signed_areas() <= 0):
        problems.append("non-positive cell orientation")
    counts = np.bincount(mesh.cell_edges.ravel(), minlength=mesh.n_edges)
    if np.any(counts > 2) or np.any(counts < 1):
        problems.append("edge shared by more than two cells")
    if np.any((counts == 1) != mesh.boundary_edges):
        problems.append("boundary flags disagree with edge sharing")
    if np.any(mesh.edges[:, 0] >= mesh.edges[:, 1]):
        problems.append("edge not oriented low to high")
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.cells.ravel()] = True
    if not used.all():
        problems.append("unused vertex (hanging node or duplicate)")
    if mesh.n_vertices - mesh.n_edges + mesh.n_cells != 1:
        problems.append("Euler relation V - E + F = 1 violated")
    # hanging nodes: a vertex lying strictly inside some edge
    V = mesh.vertices
    a, b = V[mesh.edges[:, 0]], V[mesh.edges[:, 1]]
    d = b - a
    L2 = (d**2).sum(axis=1)
    if mesh.n_vertices * mesh.n_edges <= 4_000_000:
        w = V[:, None, :] - a[None, :, :]
        s = np.einsum("vek,ek->ve", w, d) / L2
        cross = w[..., 0] * d[None, :, 1] - w[..., 1] * d[None, :, 0]
        inside = (s > 1e-12) & (s < 1 - 1e-12) & (np.abs(cross) < 1e-12 * L2)
        if inside.any():
            problems.append("hanging node")
    return problems
