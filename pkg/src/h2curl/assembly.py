"""Assembly and direct solution of the mixed quad-curl system.

Find ``u_h`` in V_h^0 and ``p_h`` in S_h^0 with

    (curl curl u_h, curl curl v) + (v, grad p_h) = (f, v)   for all v in V_h^0
    (u_h, grad q)                                = 0        for all q in S_h^0

The boundary DOFs of both spaces are removed before the block system
``[[A, B^T], [B, 0]]`` is factorized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fespace import H1, H2CURL, FeFunction, FeSpace, push_fields
from .quadrature import rule_for


class SingularSystemError(RuntimeError):
    pass


def cell_quadrature_degree(k: int) -> int:
    return 2 * k + 2


def load_quadrature_degree(k: int) -> int:
    return 2 * k + 6


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    V: FeSpace
    S: FeSpace
    A: sp.csr_matrix  # full V x V curl-curl block
    B: sp.csr_matrix  # full S x V constraint block
    rhs: np.ndarray  # full load vector on V
    free_v: np.ndarray
    free_s: np.ndarray

    def reduced(self) -> tuple[sp.csr_matrix, sp.csr_matrix, np.ndarray]:
        A = self.A[self.free_v][:, self.free_v]
        B = self.B[self.free_s][:, self.free_v]
        return A.tocsr(), B.tocsr(), self.rhs[self.free_v]

    def block_matrix(self) -> sp.csr_matrix:
        A, B, _ = self.reduced()
        return sp.bmat([[A, B.T], [B, None]], format="csr")


def _scatter(rows: np.ndarray, cols: np.ndarray, local: np.ndarray, shape) -> sp.csr_matrix:
    """Sum element matrices (nc, nr, ncol) into CSR.

    COO -> CSR conversion sums duplicates in a fixed order, so the result does
    not depend on how the element matrices were produced.
    """
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    M = sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()
    M.sum_duplicates()
    M.sort_indices()
    return M


def _vector_basis(V: FeSpace, points: np.ndarray):
    """Global-scale pushed basis on every cell: values, curls, curl-curls."""
    vals, curls, ccs = V.element.tabulate(points)
    v, c, cc = push_fields(V.B, V.det, vals[None], curls[None], ccs[None])
    s = V.dofmap.scales[:, None, :]
    return v * s[..., None], c * s, cc * s[..., None]


def _field_values(f, X: np.ndarray) -> np.ndarray:
    return np.asarray(f.value(X[..., 0], X[..., 1]) if hasattr(f, "value") else f(X[..., 0], X[..., 1]))


def assemble_curlcurl(V: FeSpace) -> sp.csr_matrix:
    rule = rule_for(V.shape, cell_quadrature_degree(V.k))
    _, _, cc = _vector_basis(V, rule.points)
    w = rule.weights[None, :] * V.det[:, None]
    Ke = np.einsum("np,npia,npja->nij", w, cc, cc)
    d = V.dofmap.cell_dofs
    return _scatter(d, d, Ke, (V.n_global, V.n_global))


def assemble_gradient_coupling(V: FeSpace, S: FeSpace) -> sp.csr_matrix:
    """``B[m, j] = (phi_j, grad psi_m)``."""
    rule = rule_for(V.shape, cell_quadrature_degree(V.k))
    vals, _, _ = _vector_basis(V, rule.points)
    _, g_ref = S.element.tabulate(rule.points)
    BiT = np.linalg.inv(S.B).swapaxes(-1, -2)
    grads = np.einsum("nab,pmb->npma", BiT, g_ref)
    w = rule.weights[None, :] * V.det[:, None]
    Ke = np.einsum("np,npma,npja->nmj", w, grads, vals)
    return _scatter(S.dofmap.cell_dofs, V.dofmap.cell_dofs, Ke, (S.n_global, V.n_global))


def assemble_load(V: FeSpace, f) -> np.ndarray:
    rule = rule_for(V.shape, load_quadrature_degree(V.k))
    vals, _, _ = _vector_basis(V, rule.points)
    X = V.map_points(rule.points)
    F = _field_values(f, X)
    w = rule.weights[None, :] * V.det[:, None]
    le = np.einsum("np,npa,npja->nj", w, F, vals)
    out = np.zeros(V.n_global)
    np.add.at(out, V.dofmap.cell_dofs.ravel(), le.ravel())
    return out


def assemble(V: FeSpace, S: FeSpace, f) -> SaddleSystem:
    if V.mesh is not S.mesh:
        raise ValueError("V and S must live on the same mesh object")
    if V.family != H2CURL or S.family != H1:
        raise ValueError("expected an H2(curl) space and a Lagrange space")
    return SaddleSystem(V, S, assemble_curlcurl(V), assemble_gradient_coupling(V, S), assemble_load(V, f),
                        V.dofmap.free_dofs, S.dofmap.free_dofs)


@dataclass(frozen=True, eq=False)
class Solution:
    u: FeFunction
    p: FeFunction
    residual: float  # normwise backward error of the reduced block system
    rhs_residual: float = 0.0  # ||K x - b|| / ||b||, for reference


def backward_error(K: sp.spmatrix, x: np.ndarray, b: np.ndarray) -> float:
    """``||K x - b||_inf / (||K||_inf ||x||_inf + ||b||_inf)``."""
    r = K @ x - b
    knorm = float(abs(K).sum(axis=1).max())
    return float(np.abs(r).max() / (knorm * np.abs(x).max() + np.abs(b).max()))


def _equilibrate(K: sp.csc_matrix) -> np.ndarray:
    """Symmetric scaling ``d`` so that ``diag(d) K diag(d)`` has entries of order one per row."""
    rowmax = np.asarray(abs(K).max(axis=1).todense()).ravel()
    if np.any(rowmax == 0):
        raise SingularSystemError("block system has an empty row")
    return 1.0 / np.sqrt(rowmax)


def solve(system: SaddleSystem, tol: float = 1e-10, refine_steps: int = 2,
          constraint_rhs: np.ndarray | None = None) -> Solution:
    """Sparse LU with partial pivoting on the equilibrated reduced block system.

    Node DOFs scale with the cell area, so on graded meshes the raw system mixes
    very different magnitudes.  A symmetric diagonal scaling and a couple of
    refinement steps keep the backward error at round-off level.
    ``constraint_rhs`` (on the free S DOFs) replaces the zero second block.
    """
    K = system.block_matrix().tocsc()
    _, _, fv = system.reduced()
    nv = len(system.free_v)
    g = np.zeros(len(system.free_s)) if constraint_rhs is None else np.asarray(constraint_rhs, dtype=float)
    rhs = np.concatenate([fv, g])
    u = np.zeros(system.V.n_global)
    p = np.zeros(system.S.n_global)
    if not np.any(rhs):
        return Solution(FeFunction(system.V, u), FeFunction(system.S, p), 0.0, 0.0)
    d = _equilibrate(K)
    Ks = sp.diags(d) @ K @ sp.diags(d)
    try:
        lu = spla.splu(Ks.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularSystemError(f"factorization failed: {exc}") from exc
    x = d * lu.solve(d * rhs)
    for _ in range(refine_steps):
        x = x + d * lu.solve(d * (rhs - K @ x))
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("factorization produced non-finite values")
    err = backward_error(K, x, rhs)
    if err > tol:
        raise SingularSystemError(f"backward error {err:.3e} exceeds {tol:.1e}")
    u[system.free_v] = x[:nv]
    p[system.free_s] = x[nv:]
    rel = float(np.linalg.norm(K @ x - rhs) / np.linalg.norm(rhs))
    return Solution(FeFunction(system.V, u), FeFunction(system.S, p), err, rel)


def dump_coo(M: sp.spmatrix, fh: TextIO) -> None:
    """Write ``i j value`` lines in row-major order."""
    C = sp.csr_matrix(M)
    C.sort_indices()
    coo = C.tocoo()
    for i, j, v in zip(coo.row, coo.col, coo.data):
        fh.write(f"{i} {j} {v:.17g}\n")
