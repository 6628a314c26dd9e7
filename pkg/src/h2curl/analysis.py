"""Error norms, convergence rates, successive differences and DOF-count formulas."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fespace import FeFunction, FeSpace, push_fields
from .fields import Field
from .quadrature import rule_for

PI = np.pi


def error_quadrature_degree(k: int) -> int:
    return 2 * k + 6


# ---------------------------------------------------------------------------
# manufactured solution on the unit square
# ---------------------------------------------------------------------------

def _g(t, n):
    """n-th derivative of sin(pi t)**3."""
    s, c = np.sin(PI * t), np.cos(PI * t)
    if n == 0:
        return s**3
    if n == 1:
        return 3 * PI * s**2 * c
    if n == 2:
        return 3 * PI**2 * (2 * s - 3 * s**3)
    if n == 3:
        return 3 * PI**3 * c * (2 - 9 * s**2)
    if n == 4:
        return 3 * PI**4 * (27 * s**3 - 20 * s)
    if n == 5:
        return 3 * PI**5 * c * (81 * s**2 - 20)
    raise ValueError(n)


def _stack(a, b):
    return np.stack(np.broadcast_arrays(a, b), axis=-1)


@dataclass(frozen=True)
class Manufactured:
    u: Field  # value, curl and curl-curl of the exact solution
    f: Field  # right-hand side (curl)^4 u
    psi: object


def manufactured_example1() -> Manufactured:
    """``u = (psi_y, -psi_x)`` with ``psi = sin^3(pi x) sin^3(pi y)``.

    ``curl u = -lap psi``, ``curl curl u = (-d_y lap psi, d_x lap psi)`` and
    ``f = (d_y lap^2 psi, -d_x lap^2 psi)``.
    """
    g = _g

    def psi(x, y):
        return g(x, 0) * g(y, 0)

    def value(x, y):
        return _stack(g(x, 0) * g(y, 1), -g(x, 1) * g(y, 0))

    def curl(x, y):
        return -(g(x, 2) * g(y, 0) + g(x, 0) * g(y, 2))

    def curlcurl(x, y):
        lap_y = g(x, 2) * g(y, 1) + g(x, 0) * g(y, 3)
        lap_x = g(x, 3) * g(y, 0) + g(x, 1) * g(y, 2)
        return _stack(-lap_y, lap_x)

    def rhs(x, y):
        bih_y = g(x, 4) * g(y, 1) + 2 * g(x, 2) * g(y, 3) + g(x, 0) * g(y, 5)
        bih_x = g(x, 5) * g(y, 0) + 2 * g(x, 3) * g(y, 2) + g(x, 1) * g(y, 4)
        return _stack(bih_y, -bih_x)

    return Manufactured(Field(value, curl, curlcurl), Field(rhs), psi)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorReport:
    l2: float
    curl: float
    curlcurl: float
    h: float
    n_dofs: int


def _cellwise(space: FeSpace):
    rule = rule_for(space.shape, error_quadrature_degree(space.k))
    w = rule.weights[None, :] * space.det[:, None]
    return rule, w


def field_norms(uh: FeFunction) -> tuple[float, float, float]:
    """L2 norms of ``u_h``, its curl and its curl-curl."""
    rule, w = _cellwise(uh.space)
    v, c, cc = uh.evaluate(rule.points)
    return (float(np.sqrt(np.sum(w * np.sum(v**2, -1)))), float(np.sqrt(np.sum(w * c**2))),
            float(np.sqrt(np.sum(w * np.sum(cc**2, -1)))))


def error_norms(uh: FeFunction, exact: Field) -> ErrorReport:
    """L2 norms of ``u - u_h``, ``curl(u - u_h)`` and ``curl curl(u - u_h)``."""
    space = uh.space
    rule, w = _cellwise(space)
    v, c, cc = uh.evaluate(rule.points)
    X = space.map_points(rule.points)
    x, y = X[..., 0], X[..., 1]
    ev = np.asarray(exact.value(x, y)) - v
    ec = np.asarray(exact.curl(x, y)) - c
    ecc = np.asarray(exact.curlcurl(x, y)) - cc
    return ErrorReport(
        float(np.sqrt(np.sum(w * np.sum(ev**2, -1)))),
        float(np.sqrt(np.sum(w * ec**2))),
        float(np.sqrt(np.sum(w * np.sum(ecc**2, -1)))),
        space.mesh.h(),
        space.n_global,
    )


def scalar_l2_error(wh: FeFunction, exact) -> float:
    """L2 error of a Lagrange function against a scalar callable."""
    space = wh.space
    rule, w = _cellwise(space)
    v, _ = wh.evaluate(rule.points)
    X = space.map_points(rule.points)
    return float(np.sqrt(np.sum(w * (np.asarray(exact(X[..., 0], X[..., 1])) - v) ** 2)))


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------

class UndefinedRateError(ValueError):
    pass


def rates(errors: Sequence[float], hs: Sequence[float]) -> list[float]:
    """``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` for consecutive pairs."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    if len(e) != len(h) or len(e) < 2:
        raise ValueError("need at least two (error, h) pairs of equal length")
    if np.any(np.diff(h) >= 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    if np.any(e <= 0):
        raise UndefinedRateError("rate undefined for a zero error")
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))


def fitted_rate(errors: Sequence[float], hs: Sequence[float]) -> float:
    """Least-squares slope of ``log e`` against ``log h``."""
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0):
        raise UndefinedRateError("rate undefined for a zero error")
    return float(np.polyfit(np.log(np.asarray(hs, dtype=float)), np.log(e), 1)[0])


def halving_orders(diffs: Sequence[float]) -> list[float]:
    """``log2(d_n / d_{n+1})`` for successive differences on refined meshes."""
    d = np.asarray(diffs, dtype=float)
    if np.any(d <= 0):
        raise UndefinedRateError("order undefined for a zero difference")
    return list(np.log2(d[:-1] / d[1:]))


# ---------------------------------------------------------------------------
# nested meshes
# ---------------------------------------------------------------------------

class NotNestedError(ValueError):
    pass


def successive_diff(coarse: FeFunction, fine: FeFunction) -> tuple[float, float, float]:
    """``||u_n - u_{n+1}|| / ||u_{n+1}||`` for the value, curl and curl-curl.

    ``fine.space.mesh.parent`` must map each fine cell into a cell of the coarse mesh.
    """
    fs, cs = fine.space, coarse.space
    parent = fs.mesh.parent
    if parent is None or len(parent) != fs.mesh.n_cells or parent.max() >= cs.mesh.n_cells:
        raise NotNestedError("fine mesh does not carry a parent map into the coarse mesh")
    rule, w = _cellwise(fs)
    vf, cf, ccf = fine.evaluate(rule.points)
    X = fs.map_points(rule.points)
    # reference coordinates of the fine quadrature points inside their parents
    Binv = np.linalg.inv(cs.B[parent])
    Xh = np.einsum("nab,npb->npa", Binv, X - cs.b[parent][:, None, :])
    tol = 1e-10
    if cs.shape == "tri":
        inside = (Xh >= -tol).all(-1) & (Xh.sum(-1) <= 1 + tol)
    else:
        inside = (np.abs(Xh) <= 1 + tol).all(-1)
    if not inside.all():
        raise NotNestedError("fine cell not contained in its parent")
    vc, cc_, ccc = _evaluate_at(coarse, parent, Xh)
    num = (np.sum(w * np.sum((vc - vf) ** 2, -1)), np.sum(w * (cc_ - cf) ** 2), np.sum(w * np.sum((ccc - ccf) ** 2, -1)))
    den = (np.sum(w * np.sum(vf**2, -1)), np.sum(w * cf**2), np.sum(w * np.sum(ccf**2, -1)))
    return tuple(float(np.sqrt(a / b)) for a, b in zip(num, den))


def _evaluate_at(f: FeFunction, cells: np.ndarray, xhat: np.ndarray):
    """Evaluate at per-cell reference points ``xhat`` (n, np, 2) on ``cells`` (n,)."""
    sp = f.space
    n, npt, _ = xhat.shape
    vals, curls, ccs = sp.element.tabulate(xhat.reshape(-1, 2))
    nl = vals.shape[1]
    vals = vals.reshape(n, npt, nl, 2)
    curls = curls.reshape(n, npt, nl)
    ccs = ccs.reshape(n, npt, nl, 2)
    lc = f.local_coeffs(cells)
    rv = np.einsum("npjc,nj->npc", vals, lc)
    rc = np.einsum("npj,nj->np", curls, lc)
    rcc = np.einsum("npjc,nj->npc", ccs, lc)
    return push_fields(sp.B[cells], sp.det[cells], rv, rc, rcc)


# ---------------------------------------------------------------------------
# DOF counts in the k >= 2 table convention (element Q_{k,k+1} x Q_{k+1,k})
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DofCounts:
    k: int
    N: int
    M1: int
    delta1: int
    M2: int
    delta2: int

    @property
    def delta1_positive(self) -> bool:
        return self.delta1 > 0

    @property
    def delta2_positive(self) -> bool:
        return self.delta2 > 0


def dof_counts(k: int, N: int) -> DofCounts:
    if k < 2 or N < 1:
        raise ValueError(f"need k >= 2 and N >= 1, got k={k}, N={N}")
    M1 = 2 * (N + 1) ** 2 + 6 * k * (N + 1) * N + (3 * k * k - 2 * k) * N * N
    M2 = 2 * (N + 1) ** 2 + 3 * k * (3 * N * N + 2 * N) + (3 * k * k - 5 * k) * N * N
    d1 = 2 * N * N * (k * k - 2 * k - 1) - 4 * N - 1
    d2 = 2 * N * N * (k * k - k - 4) - 8 * N - 1
    return DofCounts(k, N, M1, d1, M2, d2)
