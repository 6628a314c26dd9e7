"""Global finite element spaces on a :class:`~h2curl.mesh.Mesh2D`.

``V_h`` is built from the H^2(curl) reference elements through the covariant
map ``u o F = B^{-T} uh``.  Its global DOFs are

* the curl at every vertex and at the ``k-2`` nodes of every edge, ordered by
  the global edge orientation (low to high vertex index);
* ``k`` tangential moments per edge against powers of the global edge parameter;
* the interior moments of each cell (never shared).

A cell's local dual function for a node DOF is multiplied by ``det B``, and
for the ``m``-th edge moment by ``s**(m+1)`` where ``s = -1`` if the local edge
runs against the global one.  These factors live in ``DofMap.scales``.

``S_h`` is the continuous Lagrange space (Q_k on quads, P_k on triangles) on
equispaced nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import ref_element as re
from .mesh import QUAD, TRI, AffineMap, Mesh2D, SingularMapError
from .quadrature import gauss_interval
from .ref_element import EDGE_MOMENT, EDGE_SCALE, INTERIOR_MOMENT, NODE_CURL, ReferenceElement

H2CURL = "h2curl"
H1 = "h1"

SHAPE_OF = {QUAD: "rect", TRI: "tri"}


class SpaceMismatchError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scalar Lagrange reference element
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LagrangeElement:
    shape: str
    k: int
    nodes: np.ndarray  # (n, 2) reference coordinates
    entities: tuple  # ("vertex", v) | ("edge", e, j) | ("cell", i)
    exponents: np.ndarray  # (n, 2) monomial exponents
    coeffs: np.ndarray  # basis_j = sum_m coeffs[m, j] x^a_m y^b_m

    @property
    def ndofs(self) -> int:
        return len(self.nodes)

    def _monomials(self, points):
        x, y = points[:, 0:1], points[:, 1:2]
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        val = x**a * y**b
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = np.where(a > 0, a * x ** np.maximum(a - 1, 0) * y**b, 0.0)
            dy = np.where(b > 0, b * x**a * y ** np.maximum(b - 1, 0), 0.0)
        return val, dx, dy

    def tabulate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Basis values (n, ndof) and reference gradients (n, ndof, 2)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        val, dx, dy = self._monomials(points)
        return val @ self.coeffs, np.stack([dx @ self.coeffs, dy @ self.coeffs], axis=-1)


@lru_cache(maxsize=None)
def build_lagrange_element(shape: str, k: int) -> LagrangeElement:
    """Equispaced nodal element: vertices, then edge nodes along each local edge, then interior."""
    if k < 1:
        raise ValueError(f"Lagrange order must be >= 1, got {k}")
    if shape == "rect":
        verts, edges = re.RECT_VERTICES, re.RECT_EDGES
        exps = [(i, j) for j in range(k + 1) for i in range(k + 1)]
        t = np.linspace(-1.0, 1.0, k + 1)[1:-1]
        interior = [(x, y) for y in t for x in t]
    elif shape == "tri":
        verts, edges = re.TRI_VERTICES, re.TRI_EDGES
        exps = [(i, n - i) for n in range(k + 1) for i in range(n, -1, -1)]
        interior = [(i / k, j / k) for j in range(1, k) for i in range(1, k - j)]
    else:
        raise ValueError(f"unknown shape {shape!r}")
    nodes = [tuple(v) for v in verts]
    entities = [("vertex", i) for i in range(len(verts))]
    for e, (a, b) in enumerate(edges):
        for j in range(k - 1):
            s = (j + 1) / k
            nodes.append(tuple(verts[a] + s * (verts[b] - verts[a])))
            entities.append(("edge", e, j))
    nodes += interior
    entities += [("cell", i) for i in range(len(interior))]
    nodes = np.array(nodes)
    exps = np.array(exps)
    V = nodes[:, 0:1] ** exps[:, 0] * nodes[:, 1:2] ** exps[:, 1]
    return LagrangeElement(shape, k, nodes, tuple(entities), exps, np.linalg.inv(V))


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DofMap:
    n_global: int
    cell_dofs: np.ndarray  # (nc, nloc) global index of each local DOF
    scales: np.ndarray  # (nc, nloc) local function = scale * global function on the cell
    boundary_dofs: np.ndarray  # sorted global indices

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_global, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True, eq=False)
class FeSpace:
    mesh: Mesh2D
    family: str
    k: int
    element: ReferenceElement | LagrangeElement
    dofmap: DofMap
    B: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    det: np.ndarray = field(repr=False)

    @property
    def n_global(self) -> int:
        return self.dofmap.n_global

    @property
    def shape(self) -> str:
        return SHAPE_OF[self.mesh.kind]

    def cell_map(self, cell: int) -> AffineMap:
        return AffineMap(self.B[cell], self.b[cell], float(self.det[cell]))

    def map_points(self, points: np.ndarray) -> np.ndarray:
        """Reference points (np, 2) -> physical points (nc, np, 2) on every cell."""
        return np.einsum("nab,pb->npa", self.B, points) + self.b[:, None, :]

    def zero(self) -> "FeFunction":
        return FeFunction(self, np.zeros(self.n_global))


def _maps(mesh: Mesh2D):
    B, b, det = mesh.affine_maps()
    if np.any(det <= 0):
        raise SingularMapError("mesh contains degenerate or clockwise cells")
    return B, b, det


def build_h2curl_space(mesh: Mesh2D, k: int) -> FeSpace:
    shape = SHAPE_OF[mesh.kind]
    el = re.build_element(shape, k)
    B, b, det = _maps(mesh)
    nV, nE, nC = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    n_int = len(el.indices(INTERIOR_MOMENT))
    off_en = nV
    off_em = off_en + nE * (k - 2)
    off_c = off_em + nE * k
    n_global = off_c + nC * n_int

    dofs = np.empty((nC, el.ndofs), dtype=np.int64)
    scales = np.empty((nC, el.ndofs))
    ce, sg = mesh.cell_edges, mesh.cell_edge_signs.astype(float)
    for i, d in enumerate(el.dofs):
        ent = d.entity
        if d.kind == NODE_CURL and ent[0] == "vertex":
            dofs[:, i] = mesh.cells[:, ent[1]]
            scales[:, i] = det
        elif d.kind == NODE_CURL:
            e, j = ent[1], ent[2]
            jj = np.where(sg[:, e] > 0, j, k - 3 - j)
            dofs[:, i] = off_en + ce[:, e] * (k - 2) + jj
            scales[:, i] = det
        elif d.kind == EDGE_MOMENT:
            dofs[:, i] = off_em + ce[:, d.edge] * k + d.degree
            scales[:, i] = sg[:, d.edge] ** (d.degree + 1)
        else:
            dofs[:, i] = off_c + np.arange(nC) * n_int + ent[1]
            scales[:, i] = 1.0

    bv = np.flatnonzero(mesh.boundary_vertices)
    be = np.flatnonzero(mesh.boundary_edges)
    bnd = [bv, (off_en + be[:, None] * (k - 2) + np.arange(k - 2)).ravel(),
           (off_em + be[:, None] * k + np.arange(k)).ravel()]
    boundary = np.unique(np.concatenate(bnd)).astype(np.int64)
    return FeSpace(mesh, H2CURL, k, el, DofMap(n_global, dofs, scales, boundary), B, b, det)


def build_h1_space(mesh: Mesh2D, k: int) -> FeSpace:
    shape = SHAPE_OF[mesh.kind]
    el = build_lagrange_element(shape, k)
    B, b, det = _maps(mesh)
    nV, nE, nC = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    n_int = sum(1 for e in el.entities if e[0] == "cell")
    off_e = nV
    off_c = nV + nE * (k - 1)
    n_global = off_c + nC * n_int
    dofs = np.empty((nC, el.ndofs), dtype=np.int64)
    sg = mesh.cell_edge_signs
    for i, ent in enumerate(el.entities):
        if ent[0] == "vertex":
            dofs[:, i] = mesh.cells[:, ent[1]]
        elif ent[0] == "edge":
            e, j = ent[1], ent[2]
            jj = np.where(sg[:, e] > 0, j, k - 2 - j)
            dofs[:, i] = off_e + mesh.cell_edges[:, e] * (k - 1) + jj
        else:
            dofs[:, i] = off_c + np.arange(nC) * n_int + ent[1]
    be = np.flatnonzero(mesh.boundary_edges)
    boundary = np.unique(np.concatenate([
        np.flatnonzero(mesh.boundary_vertices),
        (off_e + be[:, None] * (k - 1) + np.arange(k - 1)).ravel(),
    ])).astype(np.int64)
    return FeSpace(mesh, H1, k, el, DofMap(n_global, dofs, np.ones(dofs.shape), boundary), B, b, det)


def h1_node_coordinates(space: FeSpace) -> np.ndarray:
    """Physical location of every global Lagrange node."""
    if space.family != H1:
        raise SpaceMismatchError("node coordinates exist only for Lagrange spaces")
    pts = space.map_points(space.element.nodes)
    out = np.empty((space.n_global, 2))
    out[space.dofmap.cell_dofs.ravel()] = pts.reshape(-1, 2)
    return out


# ---------------------------------------------------------------------------
# pushing reference functions to cells
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PushedBasis:
    """Physical values (nc, np, nloc, 2), curls (nc, np, nloc), curl-curls (nc, np, nloc, 2)."""

    values: np.ndarray
    curls: np.ndarray
    curlcurls: np.ndarray


def push_fields(B: np.ndarray, det: np.ndarray, vals: np.ndarray, curls: np.ndarray, ccs: np.ndarray):
    """Apply the three covariant transformation rules.

    ``B`` (..., 2, 2) and ``det`` (...) broadcast against reference samples
    whose trailing axes are ``(..., 2)`` for vectors and ``(...)`` for curls.
    Extra axes of the samples go between the map axes and the component axis.
    """
    Binv_T = np.linalg.inv(B).swapaxes(-1, -2)
    extra = vals.ndim - 1 - (B.ndim - 2)
    shp = B.shape[:-2] + (1,) * extra
    BiT = Binv_T.reshape(shp + (2, 2))
    Bm = B.reshape(shp + (2, 2))
    d = det.reshape(shp)
    v = np.einsum("...ab,...b->...a", BiT, vals)
    c = curls / d
    cc = np.einsum("...ab,...b->...a", Bm, ccs) / (d**2)[..., None]
    return v, c, cc


def push_basis(el: ReferenceElement, amap: AffineMap, points: np.ndarray) -> PushedBasis:
    """Reference dual basis pushed to the cell ``amap`` at reference ``points``."""
    if abs(amap.det_B) <= 0.0:
        raise SingularMapError("singular affine map")
    vals, curls, ccs = el.tabulate(points)
    v, c, cc = push_fields(np.asarray(amap.B)[None], np.array([amap.det_B]), vals[None], curls[None], ccs[None])
    return PushedBasis(v, c, cc)


def tangent(amap: AffineMap, tau_hat: np.ndarray) -> np.ndarray:
    """Unit physical tangent ``B tau / |B tau|``."""
    t = np.asarray(amap.B) @ np.asarray(tau_hat, dtype=float)
    return t / np.linalg.norm(t)


# ---------------------------------------------------------------------------
# FE functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FeFunction:
    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        if len(self.coeffs) != self.space.n_global:
            raise ValueError(f"expected {self.space.n_global} coefficients, got {len(self.coeffs)}")

    def local_coeffs(self, cells=slice(None)) -> np.ndarray:
        dm = self.space.dofmap
        return self.coeffs[dm.cell_dofs[cells]] * dm.scales[cells]

    def evaluate(self, points: np.ndarray, cells=None):
        """Evaluate at reference ``points`` on every cell (or the listed ``cells``).

        H^2(curl): returns values (nc,np,2), curls (nc,np), curl-curls (nc,np,2).
        Lagrange: returns values (nc,np) and gradients (nc,np,2).
        """
        sp = self.space
        sel = slice(None) if cells is None else np.asarray(cells)
        lc = self.local_coeffs(sel)
        B, det = sp.B[sel], sp.det[sel]
        if sp.family == H2CURL:
            vals, curls, ccs = sp.element.tabulate(points)
            rv = np.einsum("pjc,nj->npc", vals, lc)
            rc = lc @ curls.T
            rcc = np.einsum("pjc,nj->npc", ccs, lc)
            return push_fields(B, det, rv, rc, rcc)
        vals, grads = sp.element.tabulate(points)
        v = lc @ vals.T
        g = np.einsum("pjc,nj->npc", grads, lc)
        BiT = np.linalg.inv(B).swapaxes(-1, -2)
        return v, np.einsum("nab,npb->npa", BiT, g)


def eval_fe(f: FeFunction, cell: int, xhat) -> tuple:
    """Value, curl and curl-curl of an H^2(curl) function at one reference point of one cell."""
    v, c, cc = f.evaluate(np.atleast_2d(np.asarray(xhat, dtype=float)), cells=[cell])
    return v[0, 0], float(c[0, 0]), cc[0, 0]


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

def _field_value(u, x, y):
    return np.asarray(u.value(x, y) if hasattr(u, "value") else u(x, y))


def _field_curl(u, x, y):
    if getattr(u, "curl", None) is None:
        raise ValueError("interpolation needs a field with a point-evaluable curl")
    c = u.curl
    return np.asarray(c(x, y))


def reference_dofs(space: FeSpace, u, cells=None) -> np.ndarray:
    """Local reference DOFs (nc, nloc) of ``uh = B^T u o F`` on every cell."""
    sel = slice(None) if cells is None else np.asarray(cells)
    B, b = space.B[sel], space.b[sel]

    def sampler(curl_points, value_points):
        cp = np.einsum("nab,pb->npa", B, curl_points) + b[:, None, :]
        vp = np.einsum("nab,pb->npa", B, value_points) + b[:, None, :]
        return _field_curl(u, cp[..., 0], cp[..., 1]), _field_value(u, vp[..., 0], vp[..., 1])

    return _dofs_from_samples(space, sampler, sel)


def _dofs_from_samples(space: FeSpace, sampler, sel=slice(None)) -> np.ndarray:
    op = space.element.dof_operator()
    curls, vals = sampler(op.curl_points, op.value_points)
    B, det = space.B[sel], space.det[sel]
    curl_hat = curls * det[:, None]
    val_hat = np.einsum("nba,npb->npa", B, vals)
    return op.apply_samples(curl_hat, val_hat)


def _assemble_global(space: FeSpace, local: np.ndarray) -> FeFunction:
    dm = space.dofmap
    coeffs = np.zeros(space.n_global)
    # shared DOFs agree between cells, so plain assignment suffices
    coeffs[dm.cell_dofs.ravel()] = (local / dm.scales).ravel()
    return FeFunction(space, coeffs)


def interpolate(space: FeSpace, u) -> FeFunction:
    """Nodal/moment interpolant ``Pi_h u`` (H^2(curl)) or nodal Lagrange interpolant (H1)."""
    if space.family == H1:
        x = h1_node_coordinates(space)
        return FeFunction(space, np.asarray(u(x[:, 0], x[:, 1]), dtype=float))
    return _assemble_global(space, reference_dofs(space, u))


def interpolate_samples(space: FeSpace, sampler) -> FeFunction:
    """``Pi_h`` of a field known cell by cell.

    ``sampler(curl_points, value_points)`` receives reference points and returns
    the physical curl (nc, n1) and value (nc, n2, 2) on every cell.  This
    handles fields such as gradients of Lagrange functions, whose normal
    component jumps across edges.
    """
    if space.family != H2CURL:
        raise SpaceMismatchError("sampled interpolation is defined for H2(curl) spaces")
    return _assemble_global(space, _dofs_from_samples(space, sampler))


def gradient_interpolant(space: FeSpace, q: FeFunction) -> FeFunction:
    """``Pi_h grad q`` for a Lagrange function ``q`` on the same mesh."""
    if q.space.mesh is not space.mesh:
        raise SpaceMismatchError("spaces live on different meshes")

    def sampler(curl_points, value_points):
        _, g = q.evaluate(value_points)
        return np.zeros((space.mesh.n_cells, len(curl_points))), g

    return interpolate_samples(space, sampler)


def conformity_jumps(space: FeSpace, n_samples: int = 20) -> tuple[float, float]:
    """Largest jump of ``u.tau`` and of ``curl u`` over interior edges, over all global basis functions."""
    mesh = space.mesh
    el = space.element
    interior = np.flatnonzero(~mesh.boundary_edges)
    # (cell, local edge) pairs for each edge
    owners: dict[int, list[tuple[int, int]]] = {}
    for c in range(mesh.n_cells):
        for le, e in enumerate(mesh.cell_edges[c]):
            owners.setdefault(int(e), []).append((c, le))
    s = (np.arange(n_samples) + 0.5) / n_samples
    worst_t = worst_c = 0.0
    Binv = np.linalg.inv(space.B)
    for e in interior:
        a, b = mesh.vertices[mesh.edges[e]]
        X = a + s[:, None] * (b - a)
        tau = (b - a) / np.linalg.norm(b - a)
        traces = []
        for c, _ in owners[int(e)]:
            xh = (X - space.b[c]) @ Binv[c].T
            vals, curls, _ = el.tabulate(xh)
            v, cu, _ = push_fields(space.B[c][None], space.det[c][None], vals[None], curls[None],
                                   np.zeros_like(vals)[None])
            sc = space.dofmap.scales[c]
            traces.append((space.dofmap.cell_dofs[c], (v[0] @ tau) * sc, cu[0] * sc))
        glob = np.union1d(traces[0][0], traces[1][0])
        jt = np.zeros((n_samples, len(glob)))
        jc = np.zeros((n_samples, len(glob)))
        for sign, (idx, t, cu) in zip((1.0, -1.0), traces):
            pos = np.searchsorted(glob, idx)
            jt[:, pos] += sign * t
            jc[:, pos] += sign * cu
        worst_t = max(worst_t, float(np.abs(jt).max()))
        worst_c = max(worst_c, float(np.abs(jc).max()))
    return worst_t, worst_c


def lagrange_interp_curl(space: FeSpace, w: Callable) -> FeFunction:
    """Nodal interpolant of a scalar ``w`` in a Lagrange space of order ``k-1``.

    Its vertex and edge nodes coincide with the node-curl points of the order-``k``
    H^2(curl) element.
    """
    if space.family != H1:
        raise SpaceMismatchError("lagrange_interp_curl needs a Lagrange space")
    return interpolate(space, w)


# ---------------------------------------------------------------------------
# DOFs computed directly on a physical cell
# ---------------------------------------------------------------------------

def physical_dofs(el: ReferenceElement, amap: AffineMap, u) -> np.ndarray:
    """DOFs of ``u`` on ``F(K_hat)`` evaluated with physical points, tangents and test fields.

    Node DOFs are ``det B * curl u(p)``, edge moments integrate ``u.tau`` against the
    edge polynomial in arclength, interior moments use ``q = B q_hat / det B``.
    """
    B, det = np.asarray(amap.B), amap.det_B
    verts = amap(el.vertices)
    out = np.empty(el.ndofs)
    g = gauss_interval(el.k + 2)
    t, w = g.points[:, 0], g.weights
    cell = re._cell_rule(el.shape, 2 * el.k + 2, el.vertices)
    cq = amap(cell.points)
    cw = cell.weights * abs(det)
    cu = _field_value(u, cq[:, 0], cq[:, 1])
    for i, d in enumerate(el.dofs):
        if d.kind == NODE_CURL:
            p = amap(np.asarray(d.point))
            out[i] = det * float(_field_curl(u, np.array([p[0]]), np.array([p[1]]))[0])
        elif d.kind == EDGE_MOMENT:
            a, e = (verts[j] for j in el.edges[d.edge])
            L = np.linalg.norm(e - a)
            tau = (e - a) / L
            pts = 0.5 * (a + e) + 0.5 * t[:, None] * (e - a)
            vals = _field_value(u, pts[:, 0], pts[:, 1])
            q = (EDGE_SCALE[el.shape] * t) ** d.degree
            out[i] = float(np.sum(w * 0.5 * L * q * (vals @ tau)))
        else:
            qh = d.test.value(cell.points[:, 0], cell.points[:, 1])
            q = qh @ B.T / det
            out[i] = float(np.sum(cw * np.sum(cu * q, axis=1)))
    return out
