import json

import numpy as np
import pytest
from scipy import constants

from conftest import random_coefficients
from qbox import dynamics
from qbox.model import ModelError, PhysicalScales, Potential
from qbox.observables import (StateVector, boundary_term_p, boundary_term_x, boundary_term_x_hill,
                              ehrenfest_rhs, energy_reality_check, expectation,
                              hermiticity_defect_H, hermiticity_defect_p, I_omega, mean_force,
                              stationary_force_balance, wall_term_density_form)
from test_acceptance import GOLDEN


def eig(sol, bc, alpha, k):
    return StateVector.from_eigenstate(sol(bc, alpha), k)


def plane_wave(sol):
    """exp(+-i pi xi) built from the degenerate periodic pair, sign fixed so <p> > 0."""
    s = sol("p", 0.0)
    even, odd = s.state(2), s.state(3)
    candidates = [dynamics.StateExpansion(s, np.array([0, 1, 1j * sgn, 0]) / np.sqrt(2))
                  for sgn in (1, -1)]
    for e in candidates:
        st = dynamics.evaluate_at(e, 0.0)
        if expectation(st, "p").real > 0:
            return e, st
    raise AssertionError("no positive-momentum combination")


def test_free_ground_state_centred(sol):
    assert abs(expectation(eig(sol, "c", 0.0, 1), "x")) < 1e-10


@pytest.mark.parametrize("alpha", [0.0, 10.0, 100.0])
def test_stationary_momentum_vanishes(sol, alpha):
    for k in range(1, 5):
        assert abs(expectation(eig(sol, "c", alpha, k), "p")) < 1e-9


def test_stark_mean_position_matches_oracle(sol):
    for k, ref in enumerate(GOLDEN[10.0], start=1):
        assert expectation(eig(sol, "c", 10.0, k), "x").real == pytest.approx(ref[3], abs=1e-8)


def test_expectation_requires_normalisation(grid):
    st = StateVector(2 * np.sin(np.pi * (grid.points + 1) / 2), grid, "c")
    with pytest.raises(ModelError):
        expectation(st, "x")
    assert expectation(st, "x", require_normalized=False) == pytest.approx(0, abs=1e-12)


def test_energy_expectation_is_eigenvalue(sol):
    s = sol("c", 10.0)
    st = StateVector.from_eigenstate(s, 2)
    assert expectation(st, "H", Potential.stark(10)) == pytest.approx(s.state(2).beta, rel=1e-7)


def test_force_quadrature_equals_alpha(sol):
    for k in range(1, 5):
        assert abs(mean_force(eig(sol, "c", 10.0, k), Potential.stark(10)) - 10.0) < 1e-10


def test_hamiltonian_defect_vanishes(sol, rng):
    assert abs(hermiticity_defect_H(eig(sol, "c", 10.0, 3))) < 1e-9
    s = sol("p", 0.0)
    for _ in range(10):
        st = dynamics.evaluate_at(dynamics.StateExpansion(s, random_coefficients(rng)), 0.4)
        assert abs(hermiticity_defect_H(st)) < 1e-8


def test_hamiltonian_defect_polynomial_witness(grid):
    x = grid.points
    # psi = 1 + i xi^2: psi* psi' - psi psi*' = 4 i xi, bracket 8i, times (1/2)(hbar^2/2m)
    assert hermiticity_defect_H(StateVector(1 + 1j * x ** 2, grid, "c")) == pytest.approx(4j, abs=1e-9)
    # any real state has a vanishing bracket
    assert hermiticity_defect_H(StateVector(1 + x, grid, "c")) == 0


def test_momentum_defect(sol, grid):
    assert hermiticity_defect_p(eig(sol, "c", 10.0, 1)) == 0
    assert abs(hermiticity_defect_p(eig(sol, "p", 0.0, 2))) < 1e-12
    x = grid.points
    assert hermiticity_defect_p(StateVector(1 + x, grid, "c")) == pytest.approx(2j, abs=1e-14)


def test_neumann_witness(grid):
    x = grid.points
    st = StateVector((1 + np.sqrt(2) * np.cos(np.pi * (x + 1) / 2)) / np.sqrt(2), grid, "v")
    assert hermiticity_defect_p(st) == pytest.approx(-1j * np.sqrt(2), abs=1e-12)
    assert expectation(st, "p").imag == pytest.approx(np.sqrt(2) / 2, abs=1e-9)


def test_i_omega_zero_branches(sol):
    assert I_omega(eig(sol, "c", 10.0, 1), "x") == 0j
    assert I_omega(eig(sol, "p", 0.0, 2), "p") == 0j


def test_i_omega_momentum_confined(sol):
    assert abs(I_omega(eig(sol, "c", 0.0, 2), "p")) < 1e-8
    # (i/hbar) I_p is minus the wall bracket, which balances alpha
    assert boundary_term_p(eig(sol, "c", 10.0, 2)) == pytest.approx(-10.0, abs=1e-6)


def test_i_omega_rejects_other_operators(sol):
    with pytest.raises(ValueError):
        I_omega(eig(sol, "c", 0.0, 1), "H")


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_ehrenfest_statics_sigma(sol, k):
    st = eig(sol, "c", 10.0, k)
    on = ehrenfest_rhs(st, Potential.stark(10), 1)
    off = ehrenfest_rhs(st, Potential.stark(10), 0)
    assert abs(on.d_mean_p_dt) < 1e-6
    assert off.d_mean_p_dt.real == pytest.approx(10.0, abs=1e-6)
    assert abs(on.d_mean_x_dt) < 1e-9
    assert abs(on.wall_term_density_form + on.wall_term) < 1e-8
    assert abs(on.force - on.force_exact) < 1e-10
    assert abs(on.mean_H.imag) < 1e-9 and abs(on.mean_p.imag) < 1e-9


def test_ehrenfest_report_json(sol):
    rep = ehrenfest_rhs(eig(sol, "c", 10.0, 1), Potential.stark(10), 1)
    data = json.loads(rep.to_json())
    assert list(data) == ["mean_x", "mean_p_re", "mean_p_im", "dpdt", "wall_term", "sigma", "residual"]
    assert data["sigma"] == 1


def test_ehrenfest_rejects_bad_sigma(sol):
    with pytest.raises(ValueError):
        ehrenfest_rhs(eig(sol, "c", 0.0, 1), Potential.uniform(), 2)


def test_periodic_plane_wave_statics(sol):
    _, st = plane_wave(sol)
    rep = ehrenfest_rhs(st, Potential.uniform(), 1)
    assert rep.mean_p.real == pytest.approx(np.pi, abs=1e-7)
    assert rep.boundary_term_x == pytest.approx(-2 * np.pi, abs=1e-7)
    assert abs(rep.d_mean_x_dt) < 1e-7


def test_hill_form_matches(sol, rng):
    s = sol("p", 0.0)
    for _ in range(10):
        st = dynamics.evaluate_at(dynamics.StateExpansion(s, random_coefficients(rng)), 0.7)
        assert abs(boundary_term_x_hill(st) - boundary_term_x(st)) < 1e-10
    with pytest.raises(ModelError):
        boundary_term_x_hill(eig(sol, "c", 0.0, 1))


def test_force_balance_free_and_dimensional(sol):
    s = sol("c", 0.0)
    scales = PhysicalScales(constants.m_e, constants.e, 0.0, 1e-9)
    fb = stationary_force_balance(s, 1, scales=scales)
    assert abs(fb.wall_term) < 1e-8 and abs(fb.residual) < 1e-8
    expected = constants.hbar ** 2 * np.pi ** 2 / (8 * constants.m_e * 1e-27)
    assert fb.wall_force_left == pytest.approx(expected, rel=1e-9)
    assert fb.wall_force_right == pytest.approx(expected, rel=1e-9)


def test_force_balance_stark(sol):
    for k in range(1, 5):
        assert abs(stationary_force_balance(sol("c", 10.0), k).residual) < 1e-6
        assert stationary_force_balance(sol("c", 10.0), k, sigma=0).residual == pytest.approx(10.0, abs=1e-6)


def test_force_balance_needs_confinement(sol):
    with pytest.raises(ModelError):
        stationary_force_balance(sol("p", 0.0), 1)


def test_reality_pure_and_superposition(sol):
    s = sol("c", 10.0)
    pure = dynamics.StateExpansion(s, [0, 1])
    chk = energy_reality_check([dynamics.evaluate_at(pure, t) for t in np.linspace(0, 10, 11)],
                               Potential.stark(10))
    assert chk.ok and chk.norm_drift < 1e-12
    two = dynamics.StateExpansion(s, np.array([1, 1j]) / np.sqrt(2))
    chk = energy_reality_check([dynamics.evaluate_at(two, t) for t in np.linspace(0, 10, 21)],
                               Potential.stark(10))
    assert chk.ok and chk.norm_drift < 1e-10 and chk.imag_H < 1e-9


def test_reality_flags_decaying_state(sol):
    s = sol("c", 0.0)
    st = StateVector.from_eigenstate(s, 1)
    # a norm that decays in time makes <E> complex
    decaying = StateVector(st.values, st.grid, st.bc, st.dvalues, st.dt_values - 0.3 * st.values)
    chk = energy_reality_check([decaying], Potential.uniform())
    assert not chk.ok and chk.imag_E == pytest.approx(0.3, rel=1e-9)


def test_wall_density_form_equals_slope_bracket(sol):
    st = eig(sol, "c", 100.0, 2)
    assert abs(wall_term_density_form(st) - boundary_term_p(st)) < 1e-8
