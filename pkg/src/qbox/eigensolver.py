"""Discrete Hamiltonian -d^2/dxi^2 + V under the three boundary families and
extraction of its lowest eigenpairs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, periodic_apply, periodic_diff_matrix
from .model import INNER, BoundarySpec, ModelError, Potential

log = logging.getLogger(__name__)

REALITY_TOL = 1e-8
DEGENERACY_TOL = 1e-6
SIGN_THRESHOLD = 1e-6


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Reduced operator acting on the independent unknowns.

    ``lift`` maps a reduced vector to its values on all grid nodes, so
    ``lift @ u`` is the full wavefunction including boundary nodes.
    """

    matrix: np.ndarray = field(repr=False)
    lift: np.ndarray = field(repr=False)
    grid: Grid
    potential: Potential
    bc: BoundarySpec


@dataclass(frozen=True, eq=False)
class EigenState:
    k: int
    beta: float
    psi: np.ndarray = field(repr=False)
    dpsi: np.ndarray = field(repr=False)
    residual: float = 0.0


@dataclass(frozen=True, eq=False)
class EigenSolution:
    bc: BoundarySpec
    potential: Potential
    grid: Grid
    states: tuple[EigenState, ...]

    def state(self, k: int) -> EigenState:
        if not 1 <= k <= len(self.states):
            raise IndexError(f"state {k} not available (have {len(self.states)})")
        return self.states[k - 1]

    @property
    def betas(self) -> np.ndarray:
        return np.array([s.beta for s in self.states])

    @property
    def psis(self) -> np.ndarray:
        return np.array([s.psi for s in self.states])

    @property
    def dpsis(self) -> np.ndarray:
        return np.array([s.dpsi for s in self.states])

    def __len__(self):
        return len(self.states)


def assemble_hamiltonian(grid: Grid, potential: Potential, bc) -> Hamiltonian:
    bc = BoundarySpec.parse(bc)
    v, _ = potential.evaluate(grid)
    n = grid.n_points
    if bc is BoundarySpec.CONFINEMENT:
        full = -grid.d2.matrix + np.diag(v)
        mat = full[1:-1, 1:-1].copy()
        lift = np.zeros((n, n - 2))
        lift[1:-1] = np.eye(n - 2)
    elif bc is BoundarySpec.PERIODIC:
        if abs(v[-1] - v[0]) > 1e-12:
            raise ModelError(
                f"periodic boundary conditions need V(+1) == V(-1); "
                f"got V(-1)={v[0]:.6g}, V(+1)={v[-1]:.6g}"
            )
        mat = -periodic_diff_matrix(grid, 2).matrix + np.diag(v[:-1])
        lift = np.zeros((n, n - 1))
        lift[:-1] = np.eye(n - 1)
        lift[-1, 0] = 1.0
    else:
        # Boundary values eliminated through D1 psi = 0 at both ends.
        full = -grid.d2.matrix + np.diag(v)
        d1 = grid.d1.matrix
        ends = [0, n - 1]
        inner = slice(1, n - 1)
        closure = -np.linalg.solve(d1[np.ix_(ends, ends)], d1[ends, inner])
        mat = full[inner, inner] + full[inner][:, ends] @ closure
        lift = np.zeros((n, n - 2))
        lift[1:-1] = np.eye(n - 2)
        lift[ends] = closure
    return Hamiltonian(mat, lift, grid, potential, bc)


def _dense_eigs(mat: np.ndarray, count: int):
    vals, vecs = sla.eig(mat, check_finite=False)
    order = np.argsort(vals.real, kind="stable")
    return vals[order], vecs[:, order]


def _shift_invert_eigs(ham: Hamiltonian, count: int):
    v, _ = ham.potential.evaluate(ham.grid)
    shift = float(np.min(v)) - 1.0
    mat = sp.csc_matrix(ham.matrix)
    k = min(count + 4, mat.shape[0] - 2)
    # fixed start vector; ARPACK otherwise seeds itself randomly
    v0 = np.ones(mat.shape[0])
    try:
        vals, vecs = spla.eigs(mat, k=k, sigma=shift, which="LM", tol=1e-14, v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"shift-invert iteration did not converge: {exc}") from exc
    order = np.argsort(vals.real, kind="stable")
    return vals[order], vecs[:, order]


def _inner(grid: Grid, a: np.ndarray, b: np.ndarray):
    return INNER * (grid.weights @ (np.conj(a) * b))


def _fix_sign(psi: np.ndarray, dpsi: np.ndarray, bc: BoundarySpec):
    if bc is BoundarySpec.CONFINEMENT:
        scale = np.max(np.abs(dpsi))
        if abs(dpsi[0]) > 1e-9 * scale:
            return (psi, dpsi) if dpsi[0] > 0 else (-psi, -dpsi)
    big = np.flatnonzero(np.abs(psi) > SIGN_THRESHOLD)
    if big.size and psi[big[0]].real < 0:
        return -psi, -dpsi
    return psi, dpsi


def _resolve_cluster(grid: Grid, vecs: list[np.ndarray], bc: BoundarySpec) -> list[np.ndarray]:
    """Weighted Gram-Schmidt; periodic pairs rotated into even/odd members."""
    basis = []
    for v in vecs:
        w = v.copy()
        for b in basis:
            w = w - _inner(grid, b, w) * b
        basis.append(w / np.sqrt(_inner(grid, w, w).real))
    if bc is BoundarySpec.PERIODIC and len(basis) == 2:
        refl = [b[::-1] for b in basis]
        m = np.array([[_inner(grid, a, r).real for r in refl] for a in basis])
        m = 0.5 * (m + m.T)
        parity, rot = np.linalg.eigh(m)
        rot = rot[:, np.argsort(-parity)]
        basis = [rot[0, j] * basis[0] + rot[1, j] * basis[1] for j in range(2)]
    return basis


def solve_lowest(ham: Hamiltonian, count: int, method: str = "dense") -> EigenSolution:
    """Lowest ``count`` eigenpairs of ``ham``, ordered by eigenvalue.

    ``method="dense"`` runs a full Hessenberg/QR reduction; ``"shift-invert"``
    uses ARPACK around a shift below min V and is meant for long parameter scans.
    """
    dim = ham.matrix.shape[0]
    if count < 1 or count > max(1, dim // 10):
        raise ValueError(f"count must be in [1, {max(1, dim // 10)}] for a {dim}x{dim} operator")
    if method == "dense":
        vals, vecs = _dense_eigs(ham.matrix, count)
    elif method == "shift-invert":
        vals, vecs = _shift_invert_eigs(ham, count)
    else:
        raise ValueError(f"unknown method {method!r}")

    grid, bc = ham.grid, ham.bc
    d1 = grid.d1.matrix
    picked = []
    for val, vec in zip(vals, vecs.T):
        if len(picked) == count:
            break
        if abs(val.imag) > REALITY_TOL * (1 + abs(val.real)):
            raise SolverError(
                f"complex eigenvalue {val:.10g} among the lowest {count} states "
                f"({bc.value}, {ham.potential.describe()})"
            )
        beta = float(val.real)
        vec = vec.real if np.max(np.abs(vec.imag)) <= 1e-8 * np.max(np.abs(vec)) else vec
        psi = ham.lift @ vec
        if not _boundary_ok(psi, d1 @ psi, bc):
            log.warning("discarding spurious mode beta=%.6g (boundary residual)", beta)
            continue
        picked.append([beta, psi])
    if len(picked) < count:
        raise SolverError(f"only {len(picked)} admissible eigenpairs found, wanted {count}")

    # degeneracy clusters
    i = 0
    while i < count:
        j = i + 1
        while j < count and abs(picked[j][0] - picked[i][0]) < DEGENERACY_TOL * (1 + abs(picked[i][0])):
            j += 1
        if j - i > 1:
            for p, v in zip(picked[i:j], _resolve_cluster(grid, [p[1] for p in picked[i:j]], bc)):
                p[1] = v
        i = j

    states = []
    for k, (beta, psi) in enumerate(picked, start=1):
        psi = psi / np.sqrt(_inner(grid, psi, psi).real)
        dpsi = periodic_apply(grid, 1, psi) if bc is BoundarySpec.PERIODIC else d1 @ psi
        psi, dpsi = _fix_sign(psi, dpsi, bc)
        u = _reduced(ham, psi)
        resid = float(np.max(np.abs(ham.matrix @ u - beta * u)))
        states.append(EigenState(k, beta, psi, dpsi, resid))
    return EigenSolution(bc, ham.potential, grid, tuple(states))


def _reduced(ham: Hamiltonian, psi: np.ndarray) -> np.ndarray:
    if ham.bc is BoundarySpec.PERIODIC:
        return psi[:-1]
    return psi[1:-1]


def _boundary_ok(psi, dpsi, bc: BoundarySpec) -> bool:
    scale = max(1.0, float(np.max(np.abs(psi))))
    if bc is BoundarySpec.CONFINEMENT:
        return max(abs(psi[0]), abs(psi[-1])) < 1e-9 * scale
    if bc is BoundarySpec.PERIODIC:
        return abs(psi[-1] - psi[0]) < 1e-7 * scale
    return max(abs(dpsi[0]), abs(dpsi[-1])) < 1e-7 * scale * max(1.0, np.max(np.abs(dpsi)))


def solve(grid: Grid, potential: Potential, bc, count: int = 4,
          method: str = "dense") -> EigenSolution:
    """Assemble and solve in one call."""
    return solve_lowest(assemble_hamiltonian(grid, potential, bc), count, method=method)


def boundary_residuals(sol: EigenSolution) -> list[float]:
    """Per-state BC residual as listed for each family."""
    out = []
    for s in sol.states:
        if sol.bc is BoundarySpec.CONFINEMENT:
            out.append(max(abs(s.psi[0]), abs(s.psi[-1])))
        elif sol.bc is BoundarySpec.PERIODIC:
            out.append(max(abs(s.psi[-1] - s.psi[0]), abs(s.dpsi[-1] - s.dpsi[0])))
        else:
            out.append(max(abs(s.dpsi[0]), abs(s.dpsi[-1])))
    return out
