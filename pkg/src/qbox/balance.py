"""Local balance laws d(density)/dt + d(flux)/dxi = production.

Densities, fluxes and productions carry the same factor ``INNER`` as every
other bilinear quantity, so integrating a density with the grid weights gives
the corresponding expectation value directly.  Time derivatives of densities
come from the spectral ``dt_values`` of the snapshot, which keeps the residual
a pure measure of the spatial discretisation.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import fmt
from .model import HBAR, INNER, MASS, BoundarySpec, PhysicalScales, Potential
from .observables import KINETIC, I_omega, StateVector, omega_flux

log = logging.getLogger(__name__)

OBSERVABLES = ("probability", "position_mx", "momentum", "momentum_symmetrized")
FIELD_COLUMNS = ("xi", "density", "flux", "production", "residual")


@dataclass(frozen=True, eq=False)
class BalanceField:
    observable: str
    xi: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    flux: np.ndarray = field(repr=False)
    production: np.ndarray = field(repr=False)
    time_derivative_of_density: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    # rows that use one-sided stencils at each end
    edge: int = 1

    def flux_difference(self) -> complex:
        """S(+1) - S(-1)."""
        return complex(self.flux[-1] - self.flux[0])

    def boundary_stress_difference(self) -> complex:
        """Net force the walls exert on the particle, -(S(+1) - S(-1))."""
        return -self.flux_difference()

    def integrated_density(self) -> complex:
        return complex(self.weights @ self.density)

    def integrated_production(self) -> complex:
        return complex(self.weights @ self.production)

    def _interior(self, skip):
        skip = self.edge if skip is None else skip
        return slice(skip, len(self.xi) - skip)

    def interior_residual_max(self, skip: int | None = None) -> float:
        """Max |residual| over the nodes served by the central stencil."""
        return float(np.max(np.abs(self.residual[self._interior(skip)])))

    def interior_residual_integral(self, skip: int | None = None) -> complex:
        cut = self._interior(skip)
        return complex(self.weights[cut] @ self.residual[cut])


def _needs_dt(state: StateVector):
    if state.dt_values is None:
        raise ValueError("balance laws need a snapshot with spectral time derivatives")


def _assemble(name: str, state: StateVector, density, flux, production, dt_density) -> BalanceField:
    grid = state.grid
    residual = dt_density + state.derivative(1, flux) - production
    edge = 0 if state.bc is BoundarySpec.PERIODIC else grid.fd_order // 2
    return BalanceField(name, grid.points, density, flux, production, dt_density, residual,
                        grid.weights, edge)


def _real_if_possible(a: np.ndarray, tol: float = 0.0) -> np.ndarray:
    return a.real if np.all(np.abs(a.imag) <= tol) else a


def probability_balance(state: StateVector) -> BalanceField:
    _needs_dt(state)
    psi, dpsi, dt = state.values, state.dvalues, state.dt_values
    density = INNER * np.abs(psi) ** 2
    flux = omega_flux(state, "identity").real
    dt_density = INNER * 2.0 * np.real(np.conj(psi) * dt)
    return _assemble("probability", state, density, flux, np.zeros_like(density), dt_density)


def position_balance(state: StateVector) -> BalanceField:
    """Balance of the mass-weighted position m xi |psi|^2; its production is the momentum density."""
    _needs_dt(state)
    psi, dpsi, dt = state.values, state.dvalues, state.dt_values
    xi = state.grid.points
    density = INNER * MASS * xi * np.abs(psi) ** 2
    flux = _real_if_possible(MASS * omega_flux(state, "position"))
    production = INNER * np.conj(psi) * (HBAR / 1j) * dpsi
    dt_density = INNER * MASS * xi * 2.0 * np.real(np.conj(psi) * dt)
    return _assemble("position_mx", state, density, flux, production, dt_density)


def momentum_balance(state: StateVector, potential: Potential, form: str = "plain") -> BalanceField:
    """Momentum balance in its plain or symmetrised form.

    The plain flux is (hbar^2/2m)(|psi'|^2 - psi* psi''); the symmetrised one
    splits psi* psi'' evenly with its conjugate and has a real density.
    """
    _needs_dt(state)
    if form not in ("plain", "symmetrized"):
        raise ValueError(f"form must be 'plain' or 'symmetrized', got {form!r}")
    if state.bc is BoundarySpec.VANISHING_DERIVATIVE:
        log.warning("momentum is not hermitean under (v); the %s balance is diagnostic only", form)
    psi, dpsi = state.values, state.dvalues
    dt, dt_d = state.dt_values, state.dt_dvalues
    d2 = state.second_derivative
    _, dv = potential.evaluate(state.grid)
    production = INNER * (-dv) * np.abs(psi) ** 2
    plain_density = INNER * (HBAR / 1j) * np.conj(psi) * dpsi
    plain_dt = INNER * (HBAR / 1j) * (np.conj(dt) * dpsi + np.conj(psi) * dt_d)
    if form == "plain":
        flux = INNER * KINETIC * (np.abs(dpsi) ** 2 - np.conj(psi) * d2)
        return _assemble("momentum", state, plain_density, flux, production, plain_dt)
    flux = INNER * KINETIC * (np.abs(dpsi) ** 2 - np.real(np.conj(psi) * d2))
    return _assemble("momentum_symmetrized", state, plain_density.real, flux, production,
                     plain_dt.real)


class ExchangeIdentity(NamedTuple):
    flux_difference: complex
    i_omega_scaled: complex
    residual: float


def exchange_identity(state: StateVector, omega: str, potential: Potential | None = None) -> ExchangeIdentity:
    """S_Omega(+1) - S_Omega(-1) against I_Omega / (i hbar)."""
    flux = omega_flux(state, omega)
    lhs = complex(flux[-1] - flux[0])
    rhs = I_omega(state, omega, potential) / (1j * HBAR)
    return ExchangeIdentity(lhs, rhs, float(abs(lhs - rhs)))


def wall_forces_dimensional(state: StateVector, scales: PhysicalScales) -> tuple[float, float]:
    """Magnitudes of the forces on the walls at -1 and +1, in newtons for SI scales."""
    unit = scales.energy_unit / scales.L
    per_wall = INNER * KINETIC * np.abs(state.dvalues[[0, -1]]) ** 2
    return float(per_wall[0] * unit), float(per_wall[1] * unit)


def convergence_slope(n_points, errors) -> float:
    """Least-squares order p in error ~ h^p, with h = 2/(n-1)."""
    h = 2.0 / (np.asarray(n_points, dtype=float) - 1)
    slope, _ = np.polyfit(np.log(h), np.log(np.asarray(errors, dtype=float)), 1)
    return float(slope)


def write_field_csv(bf: BalanceField, path) -> None:
    """Columns xi, density, flux, production, residual; complex parts split into _re/_im."""
    cols = {"xi": bf.xi, "density": bf.density, "flux": bf.flux,
            "production": bf.production, "residual": bf.residual}
    header, data = [], []
    for name in FIELD_COLUMNS:
        arr = cols[name]
        if np.iscomplexobj(arr):
            header += [f"{name}_re", f"{name}_im"]
            data += [arr.real, arr.imag]
        else:
            header.append(name)
            data.append(arr)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in zip(*data):
            out.writerow([fmt(v) for v in row])
