"""
Uniform grid on [-1, +1] with high-order differentiation matrices and a
Gregory end-corrected trapezoid rule of matching order.

Stencil and quadrature coefficients are computed once per (order, width) in
exact rational arithmetic and only then converted to floats, so the
row-sum and polynomial-exactness properties hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np


class GridError(ValueError):
    pass


def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Gauss-Jordan elimination over the rationals."""
    n = len(b)
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[pivot] = m[pivot], m[col]
        inv = 1 / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [vr - f * vc for vr, vc in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


@lru_cache(maxsize=None)
def stencil(offsets: tuple[int, ...], deriv: int) -> tuple[Fraction, ...]:
    """Weights c_j with sum_j c_j f(x + s_j h) = h**deriv f^(deriv)(x) + O(h^len)."""
    size = len(offsets)
    if deriv >= size:
        raise GridError("stencil too narrow for the requested derivative")
    a = [[Fraction(s) ** m / factorial(m) for s in offsets] for m in range(size)]
    b = [Fraction(int(m == deriv)) for m in range(size)]
    return tuple(_solve_exact(a, b))


def _bernoulli(n: int) -> list[Fraction]:
    """B_0..B_n with the B_1 = -1/2 convention."""
    b = [Fraction(0)] * (n + 1)
    for m in range(n + 1):
        b[m] = Fraction(int(m == 0))
        for k in range(m):
            b[m] -= Fraction(factorial(m), factorial(k) * factorial(m + 1 - k)) * b[k]
    return b


@lru_cache(maxsize=None)
def gregory_corrections(width: int) -> tuple[Fraction, ...]:
    """End corrections a_0..a_{width-1} (in units of h) added to trapezoid weights.

    Chosen so the left-end correction reproduces the Euler-Maclaurin endpoint
    series for every polynomial of degree < width; mirrored at the right end.
    """
    bern = _bernoulli(width)
    a = [[Fraction(j) ** d for j in range(width)] for d in range(width)]
    b = [Fraction(0)] + [bern[d + 1] / (d + 1) for d in range(1, width)]
    return tuple(_solve_exact(a, b))


@dataclass(frozen=True)
class DiffOperator:
    order_of_derivative: int
    matrix: np.ndarray = field(repr=False)

    def __matmul__(self, f):
        return self.matrix @ f

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f


@dataclass(frozen=True)
class Quadrature:
    weights: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform mesh xi_i = -1 + i*h, i = 0..n_points-1."""

    n_points: int
    fd_order: int
    h: float = field(init=False)
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_points
        object.__setattr__(self, "h", 2.0 / (n - 1))
        xi = -1.0 + 2.0 * np.arange(n) / (n - 1)
        xi[0], xi[-1] = -1.0, 1.0
        # exact antisymmetry about the centre
        xi[n // 2 + 1:] = -xi[: n // 2][::-1]
        xi[n // 2] = 0.0
        xi.setflags(write=False)
        object.__setattr__(self, "points", xi)

    @property
    def xi(self) -> np.ndarray:
        return self.points

    def same_as(self, other: "Grid") -> bool:
        return self.n_points == other.n_points and self.fd_order == other.fd_order

    @property
    def d1(self) -> DiffOperator:
        return diff_matrix(self, 1)

    @property
    def d2(self) -> DiffOperator:
        return diff_matrix(self, 2)

    @property
    def weights(self) -> np.ndarray:
        return quadrature(self).weights


def build_grid(n_points: int = 1001, fd_order: int = 8) -> Grid:
    if n_points % 2 == 0:
        raise GridError(f"n_points must be odd, got {n_points}")
    if fd_order < 2 or fd_order % 2:
        raise GridError(f"fd_order must be a positive even integer, got {fd_order}")
    if n_points < fd_order + 3:
        raise GridError(
            f"n_points={n_points} too small for fd_order={fd_order} "
            f"(need at least {fd_order + 3})"
        )
    return Grid(n_points, fd_order)


def _stencil_rows(n: int, order: int, deriv: int) -> np.ndarray:
    """Dimensionless (h = 1) differentiation matrix."""
    half = order // 2
    width = order + 1 if deriv == 1 else order + 2
    mat = np.zeros((n, n))
    central = stencil(tuple(range(-half, half + 1)), deriv)
    for i in range(n):
        if half <= i < n - half:
            start, coeffs = i - half, central
        elif i < half:
            start = 0
            coeffs = stencil(tuple(range(-i, width - i)), deriv)
        else:
            start = n - width
            coeffs = stencil(tuple(range(start - i, n - i)), deriv)
        mat[i, start:start + len(coeffs)] = [float(c) for c in coeffs]
    return mat


@lru_cache(maxsize=32)
def _diff_cached(n: int, order: int, deriv: int) -> np.ndarray:
    h = 2.0 / (n - 1)
    mat = _stencil_rows(n, order, deriv) / h**deriv
    mat.setflags(write=False)
    return mat


def diff_matrix(grid: Grid, order_of_derivative: int) -> DiffOperator:
    if order_of_derivative not in (1, 2):
        raise GridError("only first and second derivatives are supported")
    mat = _diff_cached(grid.n_points, grid.fd_order, order_of_derivative)
    return DiffOperator(order_of_derivative, mat)


@lru_cache(maxsize=32)
def _periodic_cached(n: int, order: int, deriv: int) -> np.ndarray:
    m = n - 1
    half = order // 2
    coeffs = stencil(tuple(range(-half, half + 1)), deriv)
    mat = np.zeros((m, m))
    idx = np.arange(m)
    for off, c in zip(range(-half, half + 1), coeffs):
        mat[idx, (idx + off) % m] += float(c)
    mat /= (2.0 / (n - 1)) ** deriv
    mat.setflags(write=False)
    return mat


def periodic_diff_matrix(grid: Grid, order_of_derivative: int) -> DiffOperator:
    """Central stencil wrapped modulo n-1; acts on the n-1 distinct nodes."""
    if order_of_derivative not in (1, 2):
        raise GridError("only first and second derivatives are supported")
    return DiffOperator(order_of_derivative,
                        _periodic_cached(grid.n_points, grid.fd_order, order_of_derivative))


def periodic_apply(grid: Grid, order_of_derivative: int, f: np.ndarray) -> np.ndarray:
    """Differentiate a periodic sample (f[-1] == f[0]) on the full grid."""
    out = periodic_diff_matrix(grid, order_of_derivative) @ np.asarray(f)[:-1]
    return np.concatenate([out, out[:1]])


@lru_cache(maxsize=32)
def _weights_cached(n: int, order: int) -> np.ndarray:
    width = order + 1
    w = [Fraction(1)] * n
    w[0] = w[-1] = Fraction(1, 2)
    for j, a in enumerate(gregory_corrections(width)):
        w[j] += a
        w[n - 1 - j] += a
    h = Fraction(2, n - 1)
    out = np.array([float(v * h) for v in w])
    out.setflags(write=False)
    return out


def quadrature(grid: Grid) -> Quadrature:
    return Quadrature(_weights_cached(grid.n_points, grid.fd_order))


def integrate(grid: Grid, f) -> complex | float:
    f = np.asarray(f)
    if f.shape != (grid.n_points,):
        raise GridError(f"expected array of length {grid.n_points}, got shape {f.shape}")
    return quadrature(grid).weights @ f
