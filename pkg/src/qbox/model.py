"""Problem definition: boundary families, potentials, scales and closed forms.

Everything here is nondimensional: length in units of the half-width L,
energy in units of hbar^2 / (2 m L^2), and wavefunctions normalised so that
(1/2) * integral_{-1}^{+1} |psi|^2 dxi = 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import constants

from .grid import Grid

# Unit system used by every bracket in the package.  With hbar = 1 and
# 2m = 1 the Hamiltonian is -d^2/dxi^2 + V and phases evolve as exp(-i beta t).
HBAR = 1.0
MASS = 0.5
# Weight of the inner product <f|g> = (1/2) sum w f* g.
INNER = 0.5

PERIODIC_TOL = 1e-12


class ModelError(ValueError):
    pass


class BoundarySpec(str, Enum):
    CONFINEMENT = "c"
    PERIODIC = "p"
    VANISHING_DERIVATIVE = "v"

    @classmethod
    def parse(cls, value) -> "BoundarySpec":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = {m.name.lower(): m for m in cls}
            key = str(value).lower().replace("-", "_")
            if key in names:
                return names[key]
            raise ModelError(f"unknown boundary condition {value!r}; use c, p or v") from None


@dataclass(frozen=True)
class Potential:
    """V(xi) on the grid.

    ``kind`` is one of ``"uniform"``, ``"stark"`` (V = -alpha * xi) or
    ``"tabulated"`` (values sampled on the exact grid).
    """

    kind: str = "uniform"
    alpha: float = 0.0
    values: tuple | None = field(default=None, repr=False)

    @classmethod
    def uniform(cls) -> "Potential":
        return cls("uniform")

    @classmethod
    def stark(cls, alpha: float) -> "Potential":
        return cls("stark", alpha=float(alpha))

    @classmethod
    def tabulated(cls, values) -> "Potential":
        values = np.asarray(values, dtype=float)
        if values.ndim != 1:
            raise ModelError("tabulated potential must be one-dimensional")
        return cls("tabulated", values=tuple(values.tolist()))

    def evaluate(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        """Return (V_i, V'_i) on the grid."""
        xi = grid.points
        if self.kind == "uniform":
            return np.zeros_like(xi), np.zeros_like(xi)
        if self.kind == "stark":
            return -self.alpha * xi, np.full_like(xi, -self.alpha)
        if self.kind == "tabulated":
            v = np.asarray(self.values)
            if v.shape != xi.shape:
                raise ModelError(
                    f"tabulated potential has {v.size} samples, grid has {grid.n_points}"
                )
            return v.copy(), grid.d1 @ v
        raise ModelError(f"unknown potential kind {self.kind!r}")

    def is_periodic(self, grid: Grid) -> bool:
        v, _ = self.evaluate(grid)
        return abs(v[-1] - v[0]) <= PERIODIC_TOL

    def reflected(self) -> "Potential":
        """V(-xi)."""
        if self.kind == "stark":
            return Potential.stark(-self.alpha)
        if self.kind == "tabulated":
            return Potential.tabulated(np.asarray(self.values)[::-1])
        return self

    def describe(self) -> str:
        if self.kind == "stark":
            return f"stark(alpha={self.alpha:g})"
        return self.kind


def load_potential_csv(path, grid: Grid, tol: float = 1e-12) -> Potential:
    """Read a two-column (xi, V) CSV sampled on exactly this grid."""
    rows = []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                continue  # header
    data = np.array(rows)
    if data.shape != (grid.n_points, 2):
        raise ModelError(
            f"{path}: expected {grid.n_points} rows of (xi, V), got {len(rows)}"
        )
    if np.max(np.abs(data[:, 0] - grid.points)) > tol:
        raise ModelError(f"{path}: abscissae do not match the grid (no resampling is done)")
    return Potential.tabulated(data[:, 1])


@dataclass(frozen=True)
class PhysicalScales:
    m: float
    q: float
    E_field: float
    L: float
    hbar: float = constants.hbar

    def __post_init__(self):
        for name in ("m", "L", "hbar"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be strictly positive")

    @property
    def energy_unit(self) -> float:
        return self.hbar**2 / (2 * self.m * self.L**2)


def characteristic_numbers(scales: PhysicalScales, energy: float) -> tuple[float, float]:
    """(alpha, beta) = (2 m q E L^3 / hbar^2, 2 m L^2 eps / hbar^2)."""
    alpha = 2 * scales.m * scales.q * scales.E_field * scales.L**3 / scales.hbar**2
    return alpha, energy / scales.energy_unit


def dimensional_energy(beta: float, scales: PhysicalScales) -> float:
    return beta * scales.energy_unit


def wall_force(beta: float, scales: PhysicalScales) -> float:
    """Force exerted by one wall in a field-free eigenstate, 2 eps_k / (2L)."""
    return 2 * dimensional_energy(beta, scales) / (2 * scales.L)


def analytic_box_state(k: int, grid: Grid) -> tuple[float, np.ndarray, np.ndarray]:
    """Field-free confined eigenpair: beta_k, psi_k and dpsi_k/dxi."""
    if k < 1:
        raise ModelError("k must be >= 1")
    arg = 0.5 * k * np.pi * (grid.points + 1.0)
    psi = np.sqrt(2.0) * np.sin(arg)
    dpsi = k * np.pi / np.sqrt(2.0) * np.cos(arg)
    return (0.5 * k * np.pi) ** 2, psi, dpsi


def analytic_neumann_state(k: int, grid: Grid) -> tuple[float, np.ndarray, np.ndarray]:
    """Field-free vanishing-derivative eigenpair, k = 0, 1, 2, ..."""
    if k < 0:
        raise ModelError("k must be >= 0")
    arg = 0.5 * k * np.pi * (grid.points + 1.0)
    amp = 1.0 if k == 0 else np.sqrt(2.0)
    return (0.5 * k * np.pi) ** 2, amp * np.cos(arg), -amp * 0.5 * k * np.pi * np.sin(arg)


def alpha_reflection_check(neg, pos, k: int = 1, k_other: int | None = None,
                           tol: float = 1e-8) -> bool:
    """True when psi_k(xi, -alpha) == +-psi_k(-xi, alpha) and the eigenvalues agree.

    ``neg`` and ``pos`` are eigen-solutions at opposite field strengths.
    """
    if not neg.grid.same_as(pos.grid):
        raise ModelError("solutions live on different grids")
    k_other = k if k_other is None else k_other
    a, b = neg.state(k), pos.state(k_other)
    if abs(a.beta - b.beta) > tol * (1 + abs(a.beta)):
        return False
    mirrored = b.psi[::-1]
    err = min(np.max(np.abs(a.psi - mirrored)), np.max(np.abs(a.psi + mirrored)))
    return bool(err <= tol * max(1.0, np.max(np.abs(a.psi))))
