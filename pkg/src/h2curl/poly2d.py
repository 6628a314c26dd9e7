"""Dense bivariate polynomials and the polynomial spaces used by the elements.

A :class:`Poly2D` stores coefficients ``c[i, j]`` of the monomials
``x**i * y**j``.  Values are immutable; every operation returns a new object.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np


def _trim(c: np.ndarray) -> np.ndarray:
    nz = np.argwhere(c != 0.0)
    if nz.size == 0:
        return np.zeros((1, 1))
    dx, dy = nz.max(axis=0)
    return c[: dx + 1, : dy + 1].copy()


@dataclass(frozen=True, eq=False)
class Poly2D:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        c = _trim(c)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # -- constructors -------------------------------------------------
    @classmethod
    def monomial(cls, i: int, j: int, scale: float = 1.0) -> "Poly2D":
        c = np.zeros((i + 1, j + 1))
        c[i, j] = scale
        return cls(c)

    @classmethod
    def constant(cls, value: float) -> "Poly2D":
        return cls(np.array([[value]]))

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[int, int, float]]) -> "Poly2D":
        """Build from ``(i, j, coefficient)`` triples; repeated monomials add."""
        terms = list(terms)
        if not terms:
            return cls.constant(0.0)
        dx = max(t[0] for t in terms)
        dy = max(t[1] for t in terms)
        c = np.zeros((dx + 1, dy + 1))
        for i, j, a in terms:
            c[i, j] += a
        return cls(c)

    # -- properties ---------------------------------------------------
    @property
    def dx(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def dy(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def total_degree(self) -> int:
        nz = np.argwhere(self.coeffs != 0.0)
        return int(nz.sum(axis=1).max()) if nz.size else 0

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs) <= tol))

    def terms(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(self.coeffs[i, j])) for i, j in np.argwhere(self.coeffs != 0.0)]

    # -- evaluation and calculus --------------------------------------
    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        # Horner in y for each power of x, then Horner in x.
        out = np.zeros(np.broadcast(x, y).shape)
        for i in range(self.dx, -1, -1):
            row = np.zeros_like(out)
            for j in range(self.dy, -1, -1):
                row = row * y + self.coeffs[i, j]
            out = out * x + row
        return out

    def partial(self, axis: int) -> "Poly2D":
        """Exact partial derivative; ``axis`` 0 is x, 1 is y."""
        c = self.coeffs
        if axis == 0:
            if c.shape[0] == 1:
                return Poly2D.constant(0.0)
            return Poly2D(c[1:, :] * np.arange(1, c.shape[0])[:, None])
        if axis == 1:
            if c.shape[1] == 1:
                return Poly2D.constant(0.0)
            return Poly2D(c[:, 1:] * np.arange(1, c.shape[1])[None, :])
        raise ValueError(f"axis must be 0 or 1, got {axis}")

    def gradient(self) -> "VecPoly2D":
        return VecPoly2D(self.partial(0), self.partial(1))

    def laplacian(self) -> "Poly2D":
        return self.partial(0).partial(0) + self.partial(1).partial(1)

    def restrict_to_line(self, a: Sequence[float], d: Sequence[float]) -> np.ndarray:
        """Coefficients (ascending powers of t) of ``p(a + t d)``."""
        px = np.polynomial.Polynomial([a[0], d[0]])
        py = np.polynomial.Polynomial([a[1], d[1]])
        acc = np.polynomial.Polynomial([0.0])
        for i, j in np.argwhere(self.coeffs != 0.0):
            acc = acc + self.coeffs[i, j] * px**int(i) * py**int(j)
        return acc.coef

    # -- arithmetic ---------------------------------------------------
    def _padded(self, other: "Poly2D") -> tuple[np.ndarray, np.ndarray]:
        sx = max(self.coeffs.shape[0], other.coeffs.shape[0])
        sy = max(self.coeffs.shape[1], other.coeffs.shape[1])
        a = np.zeros((sx, sy))
        b = np.zeros((sx, sy))
        a[: self.coeffs.shape[0], : self.coeffs.shape[1]] = self.coeffs
        b[: other.coeffs.shape[0], : other.coeffs.shape[1]] = other.coeffs
        return a, b

    def __add__(self, other):
        if not isinstance(other, Poly2D):
            other = Poly2D.constant(float(other))
        a, b = self._padded(other)
        return Poly2D(a + b)

    __radd__ = __add__

    def __neg__(self):
        return Poly2D(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Poly2D):
            a, b = self.coeffs, other.coeffs
            c = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
            for i, j in np.argwhere(a != 0.0):
                c[i : i + b.shape[0], j : j + b.shape[1]] += a[i, j] * b
            return Poly2D(c)
        return Poly2D(self.coeffs * float(other))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if int(n) != n or n < 0:
            raise ValueError("only non-negative integer powers")
        out = Poly2D.constant(1.0)
        for _ in range(int(n)):
            out = out * self
        return out

    def __truediv__(self, other: float):
        return Poly2D(self.coeffs / float(other))

    def allclose(self, other: "Poly2D", atol: float = 1e-12) -> bool:
        a, b = self._padded(other)
        return bool(np.allclose(a, b, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        if self.is_zero():
            return "Poly2D(0)"
        parts = [f"{a:+.6g}*x^{i}*y^{j}" for i, j, a in self.terms()]
        return "Poly2D(" + " ".join(parts) + ")"


X = Poly2D.monomial(1, 0)
Y = Poly2D.monomial(0, 1)


@dataclass(frozen=True, eq=False)
class VecPoly2D:
    u1: Poly2D
    u2: Poly2D

    @classmethod
    def zero(cls) -> "VecPoly2D":
        return cls(Poly2D.constant(0.0), Poly2D.constant(0.0))

    def value(self, x, y) -> np.ndarray:
        return np.stack([self.u1(x, y), self.u2(x, y)], axis=-1)

    __call__ = value

    def curl(self, x=None, y=None):
        """Scalar curl ``d u2/dx - d u1/dy``; evaluated when points are given."""
        c = scalar_curl(self)
        return c if x is None else c(x, y)

    def curlcurl(self, x=None, y=None):
        cc = vector_curl(scalar_curl(self))
        return cc if x is None else cc.value(x, y)

    def divergence(self) -> Poly2D:
        return self.u1.partial(0) + self.u2.partial(1)

    def dot(self, other: "VecPoly2D") -> Poly2D:
        return self.u1 * other.u1 + self.u2 * other.u2

    def __add__(self, other: "VecPoly2D"):
        return VecPoly2D(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VecPoly2D"):
        return VecPoly2D(self.u1 - other.u1, self.u2 - other.u2)

    def __neg__(self):
        return VecPoly2D(-self.u1, -self.u2)

    def __mul__(self, other):
        # scalar or Poly2D factor
        return VecPoly2D(self.u1 * other, self.u2 * other)

    __rmul__ = __mul__

    def allclose(self, other: "VecPoly2D", atol: float = 1e-12) -> bool:
        return self.u1.allclose(other.u1, atol) and self.u2.allclose(other.u2, atol)

    def __repr__(self) -> str:
        return f"VecPoly2D({self.u1!r}, {self.u2!r})"


def scalar_curl(u: VecPoly2D) -> Poly2D:
    return u.u2.partial(0) - u.u1.partial(1)


def vector_curl(s: Poly2D) -> VecPoly2D:
    return VecPoly2D(s.partial(1), -s.partial(0))


def combine(coeffs: Sequence[float], basis: Sequence[VecPoly2D]) -> VecPoly2D:
    """Linear combination ``sum(c_i * basis_i)`` computed on coefficient arrays."""
    sx1 = max(b.u1.coeffs.shape[0] for b in basis)
    sy1 = max(b.u1.coeffs.shape[1] for b in basis)
    sx2 = max(b.u2.coeffs.shape[0] for b in basis)
    sy2 = max(b.u2.coeffs.shape[1] for b in basis)
    c1 = np.zeros((sx1, sy1))
    c2 = np.zeros((sx2, sy2))
    for a, b in zip(coeffs, basis):
        if a == 0.0:
            continue
        s1 = b.u1.coeffs.shape
        s2 = b.u2.coeffs.shape
        c1[: s1[0], : s1[1]] += a * b.u1.coeffs
        c2[: s2[0], : s2[1]] += a * b.u2.coeffs
    return VecPoly2D(Poly2D(c1), Poly2D(c2))


# ---------------------------------------------------------------------------
# polynomial spaces
# ---------------------------------------------------------------------------

def q_space(a: int, b: int) -> list[Poly2D]:
    """Monomials of Q_{a,b}: degree <= a in x and <= b in y."""
    if a < 0 or b < 0:
        return []
    return [Poly2D.monomial(i, j) for i, j in product(range(a + 1), range(b + 1))]


def p_space(d: int) -> list[Poly2D]:
    """Monomials of P_d ordered by total degree."""
    return [Poly2D.monomial(n - j, j) for n in range(d + 1) for j in range(n + 1)]


def homogeneous(d: int) -> list[Poly2D]:
    """Monomials of the homogeneous space of exact degree d (empty for d < 0)."""
    if d < 0:
        return []
    return [Poly2D.monomial(d - j, j) for j in range(d + 1)]


def _x_times(scalars: Iterable[Poly2D]) -> list[VecPoly2D]:
    return [VecPoly2D(s * X, s * Y) for s in scalars]


def rect_space(k: int) -> list[VecPoly2D]:
    """Basis of Q_{k-1,k} x Q_{k,k-1}, first-component monomials first."""
    zero = Poly2D.constant(0.0)
    return [VecPoly2D(m, zero) for m in q_space(k - 1, k)] + [VecPoly2D(zero, m) for m in q_space(k, k - 1)]


def phi_space(k: int) -> list[VecPoly2D]:
    """Basis of the homogeneous degree-k fields orthogonal to the position vector."""
    return [VecPoly2D(m * Y, -(m * X)) for m in homogeneous(k - 1)]


def nedelec_space(k: int, center: tuple[float, float] = (0.0, 0.0), scale: float = 1.0) -> list[VecPoly2D]:
    """Basis of R_k = (P_{k-1})^2 + Phi_k.

    R_k is invariant under translation and dilation, so the basis may be
    written in ``xi = (x - center) / scale``; this changes conditioning only.
    """
    zero = Poly2D.constant(0.0)
    xi = (X - center[0]) / scale
    eta = (Y - center[1]) / scale

    def mono(i, j):
        out = Poly2D.constant(1.0)
        for _ in range(i):
            out = out * xi
        for _ in range(j):
            out = out * eta
        return out

    scalars = [mono(n - j, j) for n in range(k) for j in range(n + 1)]
    vec = [VecPoly2D(m, zero) for m in scalars] + [VecPoly2D(zero, m) for m in scalars]
    rot = [VecPoly2D(mono(k - 1 - j, j) * eta, -(mono(k - 1 - j, j) * xi)) for j in range(k)]
    return vec + rot


def rect_interior_tests(k: int) -> list[VecPoly2D]:
    """Interior test fields of the rectangle: Q_{k-2} x, then curl of Q_{k-3} minus constants."""
    tests = _x_times(q_space(k - 2, k - 2))
    tests += [vector_curl(m) for m in q_space(k - 3, k - 3) if m.coeffs.shape != (1, 1)]
    return tests


def tri_interior_tests(k: int) -> list[VecPoly2D]:
    """Interior test fields of the triangle: (P_{k-5})^2 + x times homogeneous P_{k-5}, P_{k-4}, P_{k-3}."""
    zero = Poly2D.constant(0.0)
    tests = [VecPoly2D(m, zero) for m in p_space(k - 5)] + [VecPoly2D(zero, m) for m in p_space(k - 5)]
    for d in (k - 5, k - 4, k - 3):
        tests += _x_times(homogeneous(d))
    return tests


_SPACES = {
    "rect": rect_space,
    "nedelec": nedelec_space,
    "phi": phi_space,
    "rect_interior": rect_interior_tests,
    "tri_interior": tri_interior_tests,
}

_MIN_ORDER = {"rect": 3, "rect_interior": 3, "nedelec": 4, "tri_interior": 4, "phi": 1}


def monomial_basis(space: str, k: int):
    """Spanning monomial-type basis of a named polynomial space.

    Vector spaces: ``"rect"`` (Q_{k-1,k} x Q_{k,k-1}), ``"nedelec"`` (R_k),
    ``"phi"``, ``"rect_interior"``, ``"tri_interior"``.  Scalar spaces:
    ``"P"`` (P_k), ``"Q"`` (Q_k), ``"P_edge"`` (univariate P_{k-1}, returned as
    polynomials in x alone).
    """
    if space == "P":
        return p_space(k)
    if space == "Q":
        return q_space(k, k)
    if space == "P_edge":
        return [Poly2D.monomial(m, 0) for m in range(k)]
    if space not in _SPACES:
        raise ValueError(f"unknown space {space!r}")
    if k < _MIN_ORDER[space]:
        raise ValueError(f"order k={k} below minimum {_MIN_ORDER[space]} for space {space!r}")
    return _SPACES[space](k)


def coefficient_matrix(basis: Sequence[VecPoly2D]) -> np.ndarray:
    """Stack the flattened coefficient arrays of vector polynomials (rows = members)."""
    sx = max(max(b.u1.coeffs.shape[0], b.u2.coeffs.shape[0]) for b in basis)
    sy = max(max(b.u1.coeffs.shape[1], b.u2.coeffs.shape[1]) for b in basis)
    rows = []
    for b in basis:
        c = np.zeros((2, sx, sy))
        c[0, : b.u1.coeffs.shape[0], : b.u1.coeffs.shape[1]] = b.u1.coeffs
        c[1, : b.u2.coeffs.shape[0], : b.u2.coeffs.shape[1]] = b.u2.coeffs
        rows.append(c.ravel())
    return np.array(rows)
