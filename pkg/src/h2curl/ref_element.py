"""H^2(curl)-conforming reference elements on the square (-1,1)^2 and on a triangle.

Degrees of freedom come in three families:

* ``node_curl``: point value of the scalar curl at the vertices and at the
  ``k-2`` interior points of a uniform subdivision of every edge;
* ``edge_moment``: ``int_e u.tau (c t)**m ds`` for ``m < k``, with ``t`` the
  centered edge parameter running from -1 at the edge start to 1 at its end
  (``c`` is 1 on the square and 1/2 on the triangle);
* ``interior_moment``: ``int_K u.q dV`` for the interior test fields.

The local space is Q_{k-1,k} x Q_{k,k-1} on the square (k >= 3) and the
Nedelec space R_k on triangles (k >= 4).  The dual basis comes from inverting
the generalized Vandermonde matrix over the monomial basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from . import poly2d
from .poly2d import Poly2D, VecPoly2D
from .quadrature import QuadRule, gauss_interval, rule_for

NODE_CURL = "node_curl"
EDGE_MOMENT = "edge_moment"
INTERIOR_MOMENT = "interior_moment"

RECT_VERTICES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
# tangents run along +x on horizontal edges and +y on vertical ones
RECT_EDGES = ((0, 1), (1, 2), (3, 2), (0, 3))

TRI_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
ALT_TRI_VERTICES = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
TRI_EDGES = ((0, 1), (1, 2), (2, 0))  # counterclockwise

MIN_ORDER = {"rect": 3, "tri": 4}

# edge test polynomials are (EDGE_SCALE * t)**m: on the square this is the
# edge coordinate itself, on the triangle the offset from the edge midpoint
# in affine units
EDGE_SCALE = {"rect": 1.0, "tri": 0.5}

DATA_DIR = Path(__file__).with_name("data")


class OrderTooLowError(ValueError):
    pass


class UnisolvenceError(RuntimeError):
    pass


class AppendixMismatchError(RuntimeError):
    def __init__(self, message: str, rows: Sequence[int], matrix: np.ndarray):
        super().__init__(message)
        self.rows = list(rows)
        self.matrix = matrix


@dataclass(frozen=True, eq=False)
class DofFunctional:
    kind: str
    point: tuple[float, float] | None = None
    edge: int | None = None
    degree: int | None = None  # edge test polynomial t**degree
    test: VecPoly2D | None = None
    # topological owner: ("vertex", v), ("edge", e, j) for edge nodes,
    # ("edge", e) for moments, ("cell", i) for interior moments
    entity: tuple = ()


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    shape: str
    k: int
    vertices: np.ndarray
    edges: tuple[tuple[int, int], ...]
    dofs: tuple[DofFunctional, ...]
    space: tuple[VecPoly2D, ...]
    coeffs: np.ndarray  # dual basis = space combined with columns of coeffs
    vandermonde_cond: float
    dual_basis: tuple[VecPoly2D, ...] = field(repr=False)

    @property
    def ndofs(self) -> int:
        return len(self.dofs)

    def indices(self, kind: str) -> np.ndarray:
        return np.array([i for i, d in enumerate(self.dofs) if d.kind == kind], dtype=int)

    def edge_dofs(self, e: int) -> np.ndarray:
        """Local DOFs that live on edge ``e``: its two vertex nodes, its edge nodes and moments."""
        a, b = self.edges[e]
        out = []
        for i, d in enumerate(self.dofs):
            ent = d.entity
            if ent[0] == "vertex" and ent[1] in (a, b):
                out.append(i)
            elif ent[0] == "edge" and ent[1] == e:
                out.append(i)
        return np.array(out, dtype=int)

    def edge_geometry(self, e: int) -> tuple[np.ndarray, np.ndarray]:
        """Start point and end point of local edge ``e``."""
        a, b = self.edges[e]
        return self.vertices[a], self.vertices[b]

    def tabulate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dual basis values (n,ndof,2), curls (n,ndof) and curl-curls (n,ndof,2)."""
        return _tabulate_cached(self, np.ascontiguousarray(points, dtype=float))

    def dof_operator(self, n_edge: int | None = None, cell_degree: int | None = None) -> "DofOperator":
        return DofOperator.build(self, n_edge, cell_degree)

    def apply_dofs(self, u, n_edge: int | None = None, cell_degree: int | None = None) -> np.ndarray:
        return self.dof_operator(n_edge, cell_degree).apply(u)


def _space_tables(space: Sequence[VecPoly2D], points: np.ndarray):
    x, y = points[:, 0], points[:, 1]
    vals = np.stack([b.value(x, y) for b in space], axis=1)
    curls = np.stack([b.curl()(x, y) for b in space], axis=1)
    ccs = np.stack([b.curlcurl().value(x, y) for b in space], axis=1)
    return vals, curls, ccs


_TAB_CACHE: dict = {}


def _tabulate_cached(el: ReferenceElement, points: np.ndarray):
    key = (id(el), points.shape, points.tobytes())
    hit = _TAB_CACHE.get(key)
    if hit is not None and hit[0] is el:
        return hit[1]
    vals, curls, ccs = _space_tables(el.space, points)
    out = (
        np.einsum("pmc,mj->pjc", vals, el.coeffs),
        curls @ el.coeffs,
        np.einsum("pmc,mj->pjc", ccs, el.coeffs),
    )
    if len(_TAB_CACHE) > 256:
        _TAB_CACHE.clear()
    _TAB_CACHE[key] = (el, out)
    return out


# ---------------------------------------------------------------------------
# applying functionals
# ---------------------------------------------------------------------------

def _eval_value(u, x, y):
    if hasattr(u, "value"):
        return np.asarray(u.value(x, y))
    return np.asarray(u(x, y))


def _eval_curl(u, x, y):
    c = u.curl
    if isinstance(u, VecPoly2D):
        return u.curl(x, y)
    if c is None:
        raise ValueError("field has no curl; node-curl DOFs need a point-evaluable curl")
    return np.asarray(c(x, y))


@dataclass(frozen=True, eq=False)
class DofOperator:
    """All DOFs of an element as weights on sampled field values and curls.

    ``apply(u) = Wc @ curl(u)(curl_points) + sum(Wv * u(value_points))``.
    """

    curl_points: np.ndarray  # (nc, 2)
    curl_weights: np.ndarray  # (ndof, nc)
    value_points: np.ndarray  # (nv, 2)
    value_weights: np.ndarray  # (ndof, nv, 2)

    @classmethod
    def build(cls, el: ReferenceElement, n_edge: int | None = None, cell_degree: int | None = None):
        k = el.k
        n_edge = n_edge or k + 2
        cell_degree = cell_degree or 2 * k + 2
        ndof = el.ndofs
        curl_idx = [i for i, d in enumerate(el.dofs) if d.kind == NODE_CURL]
        curl_points = np.array([el.dofs[i].point for i in curl_idx])
        curl_weights = np.zeros((ndof, len(curl_idx)))
        for c, i in enumerate(curl_idx):
            curl_weights[i, c] = 1.0

        g = gauss_interval(n_edge)
        t, w = g.points[:, 0], g.weights
        cell = _cell_rule(el.shape, cell_degree, el.vertices)
        blocks = []
        for e in range(len(el.edges)):
            a, b = el.edge_geometry(e)
            blocks.append(0.5 * (a + b) + 0.5 * t[:, None] * (b - a))
        blocks.append(cell.points)
        value_points = np.vstack(blocks)
        value_weights = np.zeros((ndof, len(value_points), 2))
        ne = len(t)
        offset_cell = ne * len(el.edges)
        cx, cy = cell.points[:, 0], cell.points[:, 1]
        for i, d in enumerate(el.dofs):
            if d.kind == EDGE_MOMENT:
                a, b = el.edge_geometry(d.edge)
                sl = slice(d.edge * ne, (d.edge + 1) * ne)
                # u.tau ds = u.(b-a)/2 dt
                q = (EDGE_SCALE[el.shape] * t) ** d.degree
                value_weights[i, sl, :] = (w * q)[:, None] * (0.5 * (b - a))[None, :]
            elif d.kind == INTERIOR_MOMENT:
                q = d.test.value(cx, cy)
                value_weights[i, offset_cell:, :] = cell.weights[:, None] * q
        return cls(curl_points, curl_weights, value_points, value_weights)

    def apply(self, u) -> np.ndarray:
        """DOF values of a field (or of a batch of fields via ``apply_samples``)."""
        cp, vp = self.curl_points, self.value_points
        curls = _eval_curl(u, cp[:, 0], cp[:, 1])
        vals = _eval_value(u, vp[:, 0], vp[:, 1])
        return self.apply_samples(curls, vals)

    def apply_samples(self, curls: np.ndarray, vals: np.ndarray) -> np.ndarray:
        """``curls``: (..., nc); ``vals``: (..., nv, 2) -> (..., ndof)."""
        return curls @ self.curl_weights.T + np.einsum("...vc,dvc->...d", vals, self.value_weights)


def _cell_rule(shape: str, degree: int, vertices: np.ndarray) -> QuadRule:
    rule = rule_for(shape, degree)
    if shape != "tri" or np.array_equal(vertices, TRI_VERTICES):
        return rule
    B = np.column_stack([vertices[1] - vertices[0], vertices[2] - vertices[0]])
    pts = vertices[0] + rule.points @ B.T
    return QuadRule(pts, rule.weights * abs(np.linalg.det(B)), rule.exact_degree)


def apply_dof(dof: DofFunctional, u, k: int, shape: str, vertices: np.ndarray | None = None,
              edges: Sequence[tuple[int, int]] | None = None) -> float:
    """Apply one functional to a field on the reference cell of ``shape``.

    Quadrature is exact for polynomial integrands up to degree ``2k+2``.
    """
    if vertices is None:
        vertices = RECT_VERTICES if shape == "rect" else TRI_VERTICES
    if edges is None:
        edges = RECT_EDGES if shape == "rect" else TRI_EDGES
    if dof.kind == NODE_CURL:
        p = dof.point
        return float(_eval_curl(u, np.array([p[0]]), np.array([p[1]]))[0])
    if dof.kind == EDGE_MOMENT:
        a, b = (vertices[i] for i in edges[dof.edge])
        g = gauss_interval(k + 2)
        t = g.points[:, 0]
        pts = 0.5 * (a + b) + 0.5 * t[:, None] * (b - a)
        vals = _eval_value(u, pts[:, 0], pts[:, 1])
        q = (EDGE_SCALE[shape] * t) ** dof.degree
        return float(np.sum(g.weights * q * (vals @ (0.5 * (b - a)))))
    if dof.kind == INTERIOR_MOMENT:
        rule = _cell_rule(shape, 2 * k + 2, vertices)
        x, y = rule.points[:, 0], rule.points[:, 1]
        vals = _eval_value(u, x, y)
        return float(np.sum(rule.weights * np.sum(vals * dof.test.value(x, y), axis=-1)))
    raise ValueError(f"unknown DOF kind {dof.kind!r}")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _node_dofs(vertices, edges, k) -> list[DofFunctional]:
    dofs = [DofFunctional(NODE_CURL, point=tuple(v), entity=("vertex", i)) for i, v in enumerate(vertices)]
    for e, (a, b) in enumerate(edges):
        pa, pb = vertices[a], vertices[b]
        for j in range(k - 2):
            s = (j + 1) / (k - 1)
            dofs.append(DofFunctional(NODE_CURL, point=tuple(pa + s * (pb - pa)), entity=("edge", e, j)))
    return dofs


def _edge_dofs(edges, k) -> list[DofFunctional]:
    return [DofFunctional(EDGE_MOMENT, edge=e, degree=m, entity=("edge", e)) for e in range(len(edges)) for m in range(k)]


def _interior_dofs(tests) -> list[DofFunctional]:
    return [DofFunctional(INTERIOR_MOMENT, test=q, entity=("cell", i)) for i, q in enumerate(tests)]


def assemble_element(shape: str, k: int, vertices: np.ndarray, edges, dofs: Sequence[DofFunctional],
                     space: Sequence[VecPoly2D]) -> ReferenceElement:
    """Invert the generalized Vandermonde matrix for an arbitrary DOF list."""
    space = tuple(space)
    dofs = tuple(dofs)
    if len(dofs) != len(space):
        raise UnisolvenceError(f"{len(dofs)} functionals for a space of dimension {len(space)}")
    probe = ReferenceElement(shape, k, vertices, tuple(edges), dofs, space, np.eye(len(space)), 0.0, ())
    op = DofOperator.build(probe)
    V = _vandermonde(op, space)
    sv = np.linalg.svd(V, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise UnisolvenceError(f"singular Vandermonde matrix (sigma_min/sigma_max = {sv[-1] / sv[0]:.3e})")
    lu, piv = scipy.linalg.lu_factor(V)
    C = scipy.linalg.lu_solve((lu, piv), np.eye(len(space)))
    dual = tuple(poly2d.combine(C[:, j], space) for j in range(len(space)))
    return ReferenceElement(shape, k, vertices, tuple(edges), dofs, space, C, float(sv[0] / sv[-1]), dual)


def _vandermonde(op: DofOperator, space: Sequence[VecPoly2D]) -> np.ndarray:
    cp, vp = op.curl_points, op.value_points
    curls = np.stack([m.curl()(cp[:, 0], cp[:, 1]) for m in space])
    vals = np.stack([m.value(vp[:, 0], vp[:, 1]) for m in space])
    return op.apply_samples(curls, vals).T  # V[i, j] = l_i(m_j)


@lru_cache(maxsize=None)
def build_rect_element(k: int) -> ReferenceElement:
    if k < MIN_ORDER["rect"]:
        raise OrderTooLowError(f"rectangle element needs k >= 3, got {k}")
    dofs = _node_dofs(RECT_VERTICES, RECT_EDGES, k) + _edge_dofs(RECT_EDGES, k)
    dofs += _interior_dofs(poly2d.rect_interior_tests(k))
    return assemble_element("rect", k, RECT_VERTICES, RECT_EDGES, dofs, poly2d.rect_space(k))


def _build_tri(k: int, vertices: np.ndarray) -> ReferenceElement:
    if k < MIN_ORDER["tri"]:
        raise OrderTooLowError(f"triangle element needs k >= 4, got {k}")
    dofs = _node_dofs(vertices, TRI_EDGES, k) + _edge_dofs(TRI_EDGES, k)
    dofs += _interior_dofs(_orthonormalize(poly2d.tri_interior_tests(k), vertices, k))
    center = tuple(vertices.mean(axis=0))
    size = float(np.abs(vertices - vertices.mean(axis=0)).max())
    return assemble_element("tri", k, vertices, TRI_EDGES, dofs, poly2d.nedelec_space(k, center, size))


def _orthonormalize(tests: Sequence[VecPoly2D], vertices: np.ndarray, k: int) -> list[VecPoly2D]:
    """L2-orthonormal basis of span(tests) on the triangle; keeps the dual basis well scaled."""
    if not tests:
        return []
    rule = _cell_rule("tri", 2 * k, vertices)
    x, y = rule.points[:, 0], rule.points[:, 1]
    vals = np.stack([q.value(x, y) for q in tests])
    G = np.einsum("p,ipc,jpc->ij", rule.weights, vals, vals)
    L = np.linalg.cholesky(G)
    T = np.linalg.inv(L)  # rows: coefficients of the orthonormal fields
    T[np.abs(T) < 1e-15 * np.abs(T).max()] = 0.0
    return [poly2d.combine(T[i], tests) for i in range(len(tests))]


@lru_cache(maxsize=None)
def _tri_cached(k: int, key: tuple) -> ReferenceElement:
    return _build_tri(k, np.array(key).reshape(3, 2))


def build_tri_element(k: int, vertices: np.ndarray | None = None) -> ReferenceElement:
    verts = TRI_VERTICES if vertices is None else np.asarray(vertices, dtype=float)
    return _tri_cached(k, tuple(verts.ravel()))


def build_element(shape: str, k: int) -> ReferenceElement:
    if shape == "rect":
        return build_rect_element(k)
    if shape == "tri":
        return build_tri_element(k)
    raise ValueError(f"unknown shape {shape!r}")


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnisolvenceReport:
    cond: float
    max_offdiag: float
    counts: dict


def verify_unisolvence(el: ReferenceElement) -> UnisolvenceReport:
    """Re-apply every DOF to every dual basis function and measure the defect from identity."""
    op = el.dof_operator()
    V = _vandermonde(op, el.space)
    sv = np.linalg.svd(V, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise UnisolvenceError("Vandermonde matrix is rank deficient")
    D = V @ el.coeffs
    counts = {kind: int(len(el.indices(kind))) for kind in (NODE_CURL, EDGE_MOMENT, INTERIOR_MOMENT)}
    return UnisolvenceReport(float(sv[0] / sv[-1]), float(np.abs(D - np.eye(el.ndofs)).max()), counts)


def verify_trace_determination(el: ReferenceElement, edge: int, trials: int = 50, seed: int = 0) -> float:
    """Max of |u.tau| and |curl u| on ``edge`` over random fields whose edge DOFs vanish."""
    rng = np.random.default_rng(seed)
    a, b = el.edge_geometry(edge)
    s = np.linspace(0.0, 1.0, 20)
    pts = a[None, :] + s[:, None] * (b - a)[None, :]
    tau = (b - a) / np.linalg.norm(b - a)
    vals, curls, _ = el.tabulate(pts)
    on_edge = el.edge_dofs(edge)
    worst = 0.0
    for _ in range(trials):
        c = rng.standard_normal(el.ndofs)
        c[on_edge] = 0.0
        ut = (vals @ tau) @ c
        cu = curls @ c
        worst = max(worst, float(np.abs(ut).max()), float(np.abs(cu).max()))
    return worst


def verify_appendix_basis(el: ReferenceElement, appendix: Sequence[VecPoly2D], tol: float = 1e-6):
    """Match a transcribed basis against this element's DOFs.

    Returns ``(perm, err)`` where ``perm[j]`` is the local DOF index dual to
    ``appendix[j]`` and ``err = max|M - P|`` for ``M[i, j] = l_i(appendix_j)``.
    """
    op = el.dof_operator()
    M = _vandermonde(op, appendix)
    n = el.ndofs
    if M.shape != (n, n):
        raise AppendixMismatchError(f"expected {n} basis functions, got {M.shape[1]}", [], M)
    perm = np.argmax(np.abs(M), axis=0)
    P = np.zeros_like(M)
    P[perm, np.arange(n)] = 1.0
    err = np.abs(M - P)
    bad_rows = sorted(set(np.nonzero(err.max(axis=1) > tol)[0].tolist()))
    if len(set(perm.tolist())) != n or bad_rows:
        raise AppendixMismatchError(
            f"appendix basis is not dual to the DOFs (max defect {err.max():.3e})", bad_rows, M
        )
    return perm, float(err.max())


# ---------------------------------------------------------------------------
# appendix polynomials
# ---------------------------------------------------------------------------

def load_basis_file(path: str | Path) -> list[VecPoly2D]:
    """Parse a basis file: ``basis <n>`` headers followed by ``<component> <i> <j> <num>/<den>`` lines."""
    from fractions import Fraction

    bases: dict[int, list[list[tuple[int, int, float]]]] = {}
    current = None
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "basis":
            current = int(parts[1])
            bases[current] = [[], []]
            continue
        if current is None:
            raise ValueError(f"term before any 'basis' header: {raw!r}")
        comp, i, j = int(parts[0]), int(parts[1]), int(parts[2])
        bases[current][comp - 1].append((i, j, float(Fraction(parts[3]))))
    return [VecPoly2D(Poly2D.from_terms(bases[n][0]), Poly2D.from_terms(bases[n][1])) for n in sorted(bases)]


def appendix_basis(shape: str) -> list[VecPoly2D]:
    """The 24 published lowest-order basis functions for ``"rect"`` or ``"tri"``."""
    return load_basis_file(DATA_DIR / f"appendix_{shape}.txt")
