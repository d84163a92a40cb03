"""Spectral time evolution over an eigenbasis and the two routes to d<x>/dt
and d<p>/dt: differentiating the expansion directly, or the Ehrenfest form
plus boundary double sums."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .eigensolver import EigenSolution
from .model import HBAR, INNER, MASS, BoundarySpec, ModelError, Potential
from .observables import KINETIC, StateVector, expectation

TRAJECTORY_COLUMNS = ("t", "mean_x", "mean_p_re", "mean_p_im", "dxdt_direct",
                      "dxdt_ehrenfest", "dpdt_direct", "dpdt_ehrenfest", "sigma")


class MatrixElements:
    """Overlaps <psi_s| O |psi_r> over a basis, index order [s, r]."""

    def __init__(self, basis: EigenSolution, potential: Potential | None = None):
        grid = basis.grid
        pot = basis.potential if potential is None else potential
        w = INNER * grid.weights
        psi = basis.psis.astype(complex)
        dpsi = basis.dpsis.astype(complex)
        bra = np.conj(psi) * w
        v, dv = pot.evaluate(grid)
        self.beta = basis.betas
        self.x = bra @ (grid.points * psi).T
        self.d = bra @ dpsi.T
        self.p = (HBAR / 1j) * self.d
        self.force = bra @ (-dv * psi).T
        self.overlap = bra @ psi.T

        lo, hi = 0, -1
        cs = np.conj(psi)
        cds = np.conj(dpsi)
        bc = basis.bc
        # boundary brackets, entry [s, r]
        if bc is BoundarySpec.CONFINEMENT:
            bx = np.zeros_like(self.x)
        elif bc is BoundarySpec.PERIODIC:
            bx = 2.0 * (np.outer(cs[:, hi], dpsi[:, hi]) - np.outer(cds[:, lo], psi[:, lo]))
        else:
            bx = np.outer(cs[:, hi], psi[:, hi]) - np.outer(cs[:, lo], psi[:, lo])
        # correction to d<x>/dt beyond <p>/m
        self.boundary_x = (1j * HBAR / (2 * MASS)) * INNER * bx
        # wall contribution subtracted from <-V'>
        if bc is BoundarySpec.CONFINEMENT:
            bp = KINETIC * (np.outer(cds[:, hi], dpsi[:, hi]) - np.outer(cds[:, lo], dpsi[:, lo]))
        elif bc is BoundarySpec.PERIODIC:
            bp = np.zeros_like(self.x)
        else:
            er = self.beta[None, :]
            bp = ((er - v[hi]) * np.outer(cs[:, hi], psi[:, hi])
                  - (er - v[lo]) * np.outer(cs[:, lo], psi[:, lo]))
        self.boundary_p = INNER * bp


@dataclass(frozen=True, eq=False)
class StateExpansion:
    basis: EigenSolution
    coefficients: np.ndarray = field(repr=False)
    t: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 1 or c.size > len(self.basis):
            raise ModelError(f"need at most {len(self.basis)} coefficients, got {c.size}")
        if c.size < len(self.basis):
            c = np.concatenate([c, np.zeros(len(self.basis) - c.size)])
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @cached_property
    def elements(self) -> MatrixElements:
        return MatrixElements(self.basis)

    def at(self, t: float) -> "StateExpansion":
        return StateExpansion(self.basis, self.coefficients, t)

    def amplitudes(self, t: float | None = None) -> np.ndarray:
        """c_r exp(-i beta_r t / hbar)."""
        t = self.t if t is None else t
        return self.coefficients * np.exp(-1j * self.basis.betas * t / HBAR)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))

    @property
    def bc(self) -> BoundarySpec:
        return self.basis.bc


class Projection(NamedTuple):
    expansion: StateExpansion
    reconstruction_error: float


def project(initial: StateVector, basis: EigenSolution, count: int | None = None,
            bc_tol: float = 1e-8) -> Projection:
    """Expansion coefficients c_r = (1/2) int psi_r* f over the first ``count`` states."""
    if initial.bc is not basis.bc:
        raise ModelError(f"initial state is tagged ({initial.bc.value}) but the basis is ({basis.bc.value})")
    f = initial.values
    scale = max(1.0, float(np.max(np.abs(f))))
    if basis.bc is BoundarySpec.CONFINEMENT and max(abs(f[0]), abs(f[-1])) > bc_tol * scale:
        raise ModelError("initial state does not vanish at the walls")
    if basis.bc is BoundarySpec.PERIODIC and abs(f[-1] - f[0]) > bc_tol * scale:
        raise ModelError("initial state is not periodic")
    count = len(basis) if count is None else count
    if not 1 <= count <= len(basis):
        raise ValueError(f"count must be in [1, {len(basis)}]")
    psi = basis.psis[:count].astype(complex)
    w = INNER * basis.grid.weights
    c = (np.conj(psi) * w) @ f
    rest = f - c @ psi
    err = float(np.sqrt(abs(w @ np.abs(rest) ** 2)))
    return Projection(StateExpansion(basis, c), err)


def evaluate_at(expansion: StateExpansion, t: float | None = None) -> StateVector:
    """Psi(xi, t) with spatial and spectral time derivatives attached."""
    a = expansion.amplitudes(t)
    basis = expansion.basis
    psi = basis.psis.astype(complex)
    dpsi = basis.dpsis.astype(complex)
    rate = -1j * basis.betas / HBAR
    return StateVector(a @ psi, basis.grid, basis.bc, a @ dpsi,
                       (a * rate) @ psi, (a * rate) @ dpsi)


def _pair_sum(expansion: StateExpansion, t, matrix) -> complex:
    """sum_{r,s} c_r c_s* exp(i(beta_s - beta_r)t) M[s, r]."""
    a = expansion.amplitudes(t)
    return complex(np.conj(a) @ matrix @ a)


def _gap(expansion: StateExpansion) -> np.ndarray:
    b = expansion.basis.betas
    return b[:, None] - b[None, :]  # beta_s - beta_r at [s, r]


def mean_position(expansion: StateExpansion, t=None) -> complex:
    return _pair_sum(expansion, t, expansion.elements.x)


def mean_momentum(expansion: StateExpansion, t=None) -> complex:
    return _pair_sum(expansion, t, expansion.elements.p)


def td_x_direct(expansion: StateExpansion, t=None) -> complex:
    el = expansion.elements
    return 1j / HBAR * _pair_sum(expansion, t, _gap(expansion) * el.x)


def td_p_direct(expansion: StateExpansion, t=None) -> complex:
    el = expansion.elements
    return _pair_sum(expansion, t, _gap(expansion) * el.d)


def td_x_ehrenfest(expansion: StateExpansion, sigma: int = 1, t=None) -> complex:
    el = expansion.elements
    return (_pair_sum(expansion, t, el.p) / MASS
            + sigma * _pair_sum(expansion, t, el.boundary_x))


def td_p_ehrenfest(expansion: StateExpansion, potential: Potential | None = None,
                   sigma: int = 1, t=None) -> complex:
    el = expansion.elements if potential is None else MatrixElements(expansion.basis, potential)
    return _pair_sum(expansion, t, el.force - sigma * el.boundary_p)


class Identity(NamedTuple):
    lhs: complex
    rhs: complex
    residual: float


def identity_p_iv(r: int, s: int, basis: EigenSolution,
                  elements: MatrixElements | None = None) -> Identity:
    """(i/hbar)(beta_s - beta_r) x_sr  vs  p_sr / m + boundary bracket (1-based r, s)."""
    el = MatrixElements(basis) if elements is None else elements
    i, j = s - 1, r - 1
    lhs = 1j / HBAR * (el.beta[i] - el.beta[j]) * el.x[i, j]
    rhs = el.p[i, j] / MASS + el.boundary_x[i, j]
    return Identity(complex(lhs), complex(rhs), float(abs(lhs - rhs)))


def identity_force(r: int, s: int, basis: EigenSolution, potential: Potential | None = None,
                   elements: MatrixElements | None = None) -> Identity:
    """<s|-V'|r>  vs  (beta_s - beta_r) <s|d/dxi|r> + boundary bracket (1-based r, s)."""
    el = elements if elements is not None else MatrixElements(basis, potential)
    i, j = s - 1, r - 1
    lhs = el.force[i, j]
    rhs = (el.beta[i] - el.beta[j]) * el.d[i, j] + el.boundary_p[i, j]
    return Identity(complex(lhs), complex(rhs), float(abs(lhs - rhs)))


def trajectory(expansion: StateExpansion, times, sigma: int = 1) -> list[dict]:
    rows = []
    for t in times:
        t = float(t)
        mp = mean_momentum(expansion, t)
        rows.append({
            "t": t,
            "mean_x": mean_position(expansion, t).real,
            "mean_p_re": mp.real,
            "mean_p_im": mp.imag,
            "dxdt_direct": td_x_direct(expansion, t).real,
            "dxdt_ehrenfest": td_x_ehrenfest(expansion, sigma, t).real,
            "dpdt_direct": td_p_direct(expansion, t).real,
            "dpdt_ehrenfest": td_p_ehrenfest(expansion, None, sigma, t).real,
            "sigma": sigma,
        })
    return rows


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.17g}"


def write_trajectory_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(TRAJECTORY_COLUMNS)
        for row in rows:
            out.writerow([fmt(row[c]) for c in TRAJECTORY_COLUMNS])


def position_oscillation(expansion: StateExpansion, times) -> np.ndarray:
    """<xi>(t) sampled by evaluating the wavefunction (independent of the pair sums)."""
    return np.array([expectation(evaluate_at(expansion, t), "position").real for t in times])
