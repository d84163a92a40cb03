"""Expectation values, hermiticity defects, boundary integrals and the
Ehrenfest right-hand sides with their wall terms.

All brackets follow the unit system of :mod:`qbox.model` (hbar = 1, m = 1/2,
unit half-length).  Quantities that are bilinear in the wavefunction carry
the factor ``INNER`` = 1/2 that comes with the nondimensional normalisation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .grid import Grid, periodic_apply
from .model import HBAR, INNER, MASS, BoundarySpec, ModelError, PhysicalScales, Potential

KINETIC = HBAR**2 / (2 * MASS)

POSITION, MOMENTUM, HAMILTONIAN, IDENTITY = "position", "momentum", "hamiltonian", "identity"
_ALIASES = {"identity": IDENTITY, "1": IDENTITY, "x": POSITION, "position": POSITION,
            "p": MOMENTUM, "momentum": MOMENTUM, "h": HAMILTONIAN, "hamiltonian": HAMILTONIAN, "energy": HAMILTONIAN}


def _operator(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown operator {name!r}") from None


@dataclass(frozen=True, eq=False)
class StateVector:
    """Wavefunction snapshot on the full grid.

    ``dvalues`` is d/dxi (D1 applied when not given).  ``dt_values`` and
    ``dt_dvalues`` carry the spectral time derivatives of the wavefunction and
    of its slope; they are only present for snapshots of a time-dependent
    expansion or an eigenstate.
    """

    values: np.ndarray = field(repr=False)
    grid: Grid
    bc: BoundarySpec
    dvalues: np.ndarray | None = field(default=None, repr=False)
    dt_values: np.ndarray | None = field(default=None, repr=False)
    dt_dvalues: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.n_points,):
            raise ModelError(f"state has shape {vals.shape}, grid has {self.grid.n_points} points")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "bc", BoundarySpec.parse(self.bc))
        if self.dvalues is None:
            object.__setattr__(self, "dvalues", self.derivative(1, vals))
        if self.dt_values is not None and self.dt_dvalues is None:
            object.__setattr__(self, "dt_dvalues", self.derivative(1, np.asarray(self.dt_values)))

    def derivative(self, order: int, f: np.ndarray) -> np.ndarray:
        if self.bc is BoundarySpec.PERIODIC:
            return periodic_apply(self.grid, order, f)
        return (self.grid.d1 if order == 1 else self.grid.d2) @ f

    @classmethod
    def from_eigenstate(cls, solution, k: int, phase: complex = 1.0) -> "StateVector":
        st = solution.state(k)
        psi = phase * st.psi.astype(complex)
        dpsi = phase * st.dpsi.astype(complex)
        rate = -1j * st.beta / HBAR
        return cls(psi, solution.grid, solution.bc, dpsi, rate * psi, rate * dpsi)

    @property
    def second_derivative(self) -> np.ndarray:
        return self.derivative(2, self.values)

    def norm(self) -> float:
        return float(INNER * (self.grid.weights @ np.abs(self.values) ** 2))

    def normalized(self) -> "StateVector":
        s = 1.0 / np.sqrt(self.norm())
        scale = lambda a: None if a is None else s * a
        return StateVector(s * self.values, self.grid, self.bc, s * self.dvalues,
                           scale(self.dt_values), scale(self.dt_dvalues))

    def require_normalized(self, tol: float = 1e-9):
        n = self.norm()
        if abs(n - 1.0) > tol:
            raise ModelError(f"state is not normalised: (1/2) int |psi|^2 = {n:.12g}")


def _integral(state: StateVector, density) -> complex:
    return complex(INNER * (state.grid.weights @ density))


def _bracket(values: np.ndarray) -> complex:
    """f(+1) - f(-1)."""
    return complex(values[-1] - values[0])


def expectation(state: StateVector, which: str, potential: Potential | None = None,
                require_normalized: bool = True) -> complex:
    which = _operator(which)
    if require_normalized:
        state.require_normalized()
    psi = state.values
    if which == POSITION:
        return _integral(state, np.conj(psi) * state.grid.points * psi)
    if which == MOMENTUM:
        return _integral(state, np.conj(psi) * (HBAR / 1j) * state.dvalues)
    if potential is None:
        raise ValueError("the hamiltonian needs a potential")
    v, _ = potential.evaluate(state.grid)
    h_psi = -KINETIC * state.second_derivative + v * psi
    return _integral(state, np.conj(psi) * h_psi)


def mean_force(state: StateVector, potential: Potential) -> float:
    """<-V'> by quadrature."""
    _, dv = potential.evaluate(state.grid)
    return _integral(state, -dv * np.abs(state.values) ** 2).real


def energy_expectation(state: StateVector) -> complex:
    """<E> from i hbar d/dt, divided by the instantaneous norm."""
    if state.dt_values is None:
        raise ValueError("state carries no time derivative")
    num = _integral(state, np.conj(state.values) * 1j * HBAR * state.dt_values)
    return num / state.norm()


def hermiticity_defect_H(state: StateVector, potential: Potential | None = None) -> complex:
    """<H>* - <H> as the boundary bracket of psi* psi' - psi psi*'."""
    psi, dpsi = state.values, state.dvalues
    w = np.conj(psi) * dpsi - psi * np.conj(dpsi)
    return INNER * KINETIC * _bracket(w)


def hermiticity_defect_p(state: StateVector) -> complex:
    """<p>* - <p> = i hbar [|psi|^2] between the walls."""
    return INNER * 1j * HBAR * _bracket(np.abs(state.values) ** 2)


def _time_rate(state: StateVector) -> np.ndarray:
    if state.dt_values is None:
        raise ValueError("this quantity needs the spectral time derivative of the state")
    return state.dt_values


def I_omega(state: StateVector, omega: str, potential: Potential | None = None) -> complex:
    """Closed-form boundary value of I_Omega for the state's boundary family."""
    omega = _operator(omega)
    psi, dpsi, bc = state.values, state.dvalues, state.bc
    if omega == POSITION:
        if bc is BoundarySpec.CONFINEMENT:
            return 0j
        if bc is BoundarySpec.PERIODIC:
            length = 2.0
            val = length * (np.conj(psi[-1]) * dpsi[-1] - psi[0] * np.conj(dpsi[0]))
        else:
            val = _bracket(np.abs(psi) ** 2)
        return INNER * KINETIC * complex(val)
    if omega != MOMENTUM:
        raise ValueError("I_omega is defined here for position and momentum only")
    if bc is BoundarySpec.CONFINEMENT:
        val = -KINETIC * _bracket(np.abs(dpsi) ** 2)
    elif bc is BoundarySpec.PERIODIC:
        return 0j
    else:
        if potential is None:
            raise ValueError("the (v) momentum branch needs the potential")
        v, _ = potential.evaluate(state.grid)
        dens = np.conj(psi) * v * psi - 1j * HBAR * np.conj(psi) * _time_rate(state)
        val = _bracket(dens)
    return INNER * (HBAR / 1j) * complex(val)


def omega_flux(state: StateVector, omega: str) -> np.ndarray:
    """S_Omega = hbar/(2 m i) [psi* (Omega psi)' - (Omega psi) psi*'] on the grid."""
    omega = _operator(omega)
    psi, dpsi = state.values, state.dvalues
    if omega == POSITION:
        o_psi = state.grid.points * psi
        d_o_psi = psi + state.grid.points * dpsi
    elif omega == MOMENTUM:
        o_psi = (HBAR / 1j) * dpsi
        d_o_psi = (HBAR / 1j) * state.second_derivative
    else:
        o_psi = psi
        d_o_psi = dpsi
    return INNER * HBAR / (2 * MASS * 1j) * (np.conj(psi) * d_o_psi - o_psi * np.conj(dpsi))


def boundary_term_x(state: StateVector) -> complex:
    """(i/hbar) I_x: the correction to d<x>/dt beyond <p>/m."""
    return 1j / HBAR * I_omega(state, POSITION)


def boundary_term_x_hill(state: StateVector) -> complex:
    """Periodic correction to d<x>/dt written with both slopes taken at +1."""
    if state.bc is not BoundarySpec.PERIODIC:
        raise ModelError("this form of the position boundary term needs periodic states")
    psi, dpsi = state.values[-1], state.dvalues[-1]
    length = 2.0
    bracket = psi * np.conj(dpsi) - np.conj(psi) * dpsi
    return complex(-INNER * 1j * HBAR / (2 * MASS) * length * bracket)


def boundary_term_p(state: StateVector, potential: Potential | None = None) -> complex:
    """(i/hbar) I_p: the wall (exchange) contribution to d<p>/dt."""
    return 1j / HBAR * I_omega(state, MOMENTUM, potential)


def wall_term_density_form(state: StateVector) -> complex:
    """Wall force written through the probability-density 'potential'.

    [-(hbar^2/4m) d^2|psi|^2/dx^2] evaluated at +1 minus at -1; under
    confinement this equals :func:`boundary_term_p`.
    """
    d2rho = state.grid.d2 @ (np.abs(state.values) ** 2)
    return INNER * complex(-(HBAR**2 / (4 * MASS)) * (d2rho[-1] - d2rho[0]))


@dataclass
class EhrenfestReport:
    mean_x: float
    mean_p: complex
    mean_H: complex
    d_mean_x_dt: complex
    d_mean_p_dt: complex
    boundary_term_x: complex
    boundary_term_p: complex
    sigma: int
    force: float = 0.0
    force_exact: float | None = None
    wall_term: float = 0.0
    wall_term_density_form: complex | None = None
    dpdt_direct: complex | None = None
    residual: complex | None = None
    diagnostic_only: bool = False

    def to_dict(self) -> dict:
        """Fixed-name JSON record."""
        res = self.residual
        return {
            "mean_x": float(self.mean_x),
            "mean_p_re": float(self.mean_p.real),
            "mean_p_im": float(self.mean_p.imag),
            "dpdt": float(self.d_mean_p_dt.real),
            "wall_term": float(self.wall_term),
            "sigma": int(self.sigma),
            "residual": None if res is None else float(res.real),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def ehrenfest_rhs(state: StateVector, potential: Potential, sigma: int = 1) -> EhrenfestReport:
    """Right-hand sides of d<x>/dt and d<p>/dt for the state's boundary family.

    ``sigma`` = 0 drops the boundary terms (Ehrenfest's original statement),
    ``sigma`` = 1 keeps them.  When the state carries a time derivative the
    directly differentiated d<p>/dt is reported too, and ``residual`` is the
    Ehrenfest value minus the direct one.
    """
    if sigma not in (0, 1):
        raise ValueError("sigma must be 0 or 1")
    state.require_normalized()
    mx = expectation(state, POSITION).real
    mp = expectation(state, MOMENTUM)
    mh = expectation(state, HAMILTONIAN, potential)
    bx = boundary_term_x(state)
    need_dt = state.bc is BoundarySpec.VANISHING_DERIVATIVE
    bp = boundary_term_p(state, potential) if (not need_dt or state.dt_values is not None) else np.nan
    force = mean_force(state, potential)
    dxdt = mp / MASS + sigma * bx
    dpdt = force + sigma * bp
    # the wall term as the positive bracket (1/2)[|psi'|^2] in the confined case
    wall = -complex(bp).real if np.isfinite(bp) else float("nan")

    direct = None
    if state.dt_values is not None:
        psi, dpsi = state.values, state.dvalues
        dens = (np.conj(state.dt_values) * dpsi + np.conj(psi) * state.dt_dvalues) * (HBAR / 1j)
        direct = _integral(state, dens)
    return EhrenfestReport(
        mean_x=mx, mean_p=mp, mean_H=mh,
        d_mean_x_dt=dxdt, d_mean_p_dt=dpdt,
        boundary_term_x=bx, boundary_term_p=bp, sigma=sigma,
        force=force,
        force_exact=potential.alpha if potential.kind == "stark" else None,
        wall_term=wall,
        wall_term_density_form=wall_term_density_form(state)
        if state.bc is BoundarySpec.CONFINEMENT else None,
        dpdt_direct=direct,
        residual=None if direct is None else dpdt - direct,
        diagnostic_only=need_dt,
    )


class ForceBalance(NamedTuple):
    lhs: float
    force: float
    force_quadrature: float
    wall_term: float
    residual: float
    wall_force_left: float | None = None
    wall_force_right: float | None = None


def stationary_force_balance(solution, k: int, sigma: int = 1,
                             scales: PhysicalScales | None = None) -> ForceBalance:
    """Statics of a pure confined eigenstate: force vs (1/2)[(psi')^2]_{-1}^{+1}.

    ``residual`` is force - sigma * wall_term and should vanish for sigma = 1.
    With ``scales`` the per-wall forces are also returned in newtons.
    """
    if solution.bc is not BoundarySpec.CONFINEMENT:
        raise ModelError("the stationary balance identity holds for confinement only")
    st = solution.state(k)
    pot = solution.potential
    state = StateVector.from_eigenstate(solution, k)
    fq = mean_force(state, pot)
    force = pot.alpha if pot.kind == "stark" else fq
    slope2 = np.abs(st.dpsi) ** 2
    wall = INNER * KINETIC * float(slope2[-1] - slope2[0])
    left = right = None
    if scales is not None:
        unit = scales.hbar**2 / (2 * scales.m) / (2 * scales.L**3)
        left, right = unit * float(slope2[0]), unit * float(slope2[-1])
    return ForceBalance(0.0, force, fq, wall, force - sigma * wall, left, right)


class RealityCheck(NamedTuple):
    imag_H: float
    imag_E: float
    norm_drift: float
    ok: bool


def energy_reality_check(states: Iterable[StateVector], potential: Potential,
                         drift_tol: float = 1e-10, imag_tol: float = 1e-9) -> RealityCheck:
    """Norm conservation and the reality of <H> and <E> over a set of snapshots."""
    norms, imag_h, imag_e = [], 0.0, 0.0
    for s in states:
        n = s.norm()
        norms.append(n)
        h = expectation(s, HAMILTONIAN, potential, require_normalized=False) / n
        imag_h = max(imag_h, abs(h.imag))
        if s.dt_values is not None:
            imag_e = max(imag_e, abs(energy_expectation(s).imag))
    drift = float(np.max(norms) - np.min(norms)) if norms else 0.0
    return RealityCheck(imag_h, imag_e, drift,
                        drift < drift_tol and imag_h < imag_tol and imag_e < imag_tol)
