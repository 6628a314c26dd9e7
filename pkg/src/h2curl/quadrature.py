"""Quadrature on (-1, 1), (-1, 1)^2 and the reference triangle (0,0),(1,0),(0,1)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_TRI_DEGREE = 20


@dataclass(frozen=True, eq=False)
class QuadRule:
    points: np.ndarray  # (n, dim)
    weights: np.ndarray  # (n,)
    exact_degree: int

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract the leading (point) axis of ``values`` with the weights."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def gauss_interval(n: int) -> QuadRule:
    if n < 1:
        raise ValueError("need at least one Gauss point")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadRule(x[:, None], w, 2 * n - 1)


@lru_cache(maxsize=None)
def rect_rule(n: int) -> QuadRule:
    g = gauss_interval(n)
    x = g.points[:, 0]
    xx, yy = np.meshgrid(x, x, indexing="ij")
    w = np.outer(g.weights, g.weights)
    return QuadRule(np.column_stack([xx.ravel(), yy.ravel()]), w.ravel(), 2 * n - 1)


@lru_cache(maxsize=None)
def tri_rule(degree: int) -> QuadRule:
    """Collapsed (Duffy) Gauss-Jacobi rule exact for total degree ``degree``."""
    if degree > MAX_TRI_DEGREE:
        raise ValueError(f"triangle rules supported up to degree {MAX_TRI_DEGREE}, got {degree}")
    n = max(1, (degree + 2) // 2)
    # s in (-1,1) along x with Jacobi weight (1-s) absorbing the collapse Jacobian
    s, ws = roots_jacobi(n, 1.0, 0.0)
    t, wt = np.polynomial.legendre.leggauss(n)
    a = (1.0 + s) / 2.0  # x-coordinate of the collapsed direction
    pts, wts = [], []
    for ai, wa in zip(a, ws):
        for tj, wb in zip(t, wt):
            b = (1.0 + tj) / 2.0
            pts.append((ai, (1.0 - ai) * b))
            # ws integrates (1-s) f ds; dx dy = (1-a) da db, da = ds/2, db = dt/2
            wts.append(wa * wb / 8.0)
    return QuadRule(np.array(pts), np.array(wts), 2 * n - 1)


def rule_for(shape: str, degree: int) -> QuadRule:
    """Cell rule exact for ``degree`` on the reference cell of ``shape``."""
    if shape == "rect":
        return rect_rule(max(1, (degree + 2) // 2))
    if shape == "tri":
        return tri_rule(degree)
    raise ValueError(f"unknown cell shape {shape!r}")
