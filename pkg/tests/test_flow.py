import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyonflow.backgrounds import near_horizon_from_attractor
from dyonflow.errors import EmptySample, IllConditionedFit, MaxIters, NoContraction, NonPositive
from dyonflow.flow import (
    FlowProfile, PhaseState, SolverConfig, apply_integral_operator, asymptotic_match, contraction_delta, lipschitz_CM,
    near_horizon_seed, picard_chain, picard_solve, rhs, rk_solve, sup_distance,
)
from dyonflow.kahler import KahlerModel
from dyonflow.model import Charges, GaugeCouplings, ModelSpec, Polynomial
from dyonflow.potentials import effective_potential_grad, ell_inverse

from conftest import attractor_model, curved_model, flat_model, minkowski

finite = st.floats(-10, 10)


@settings(max_examples=50)
@given(st.lists(finite, min_size=8, max_size=8))
def test_phase_state_real_round_trip(vals):
    y = np.array(vals)
    s = PhaseState.from_real(y)
    np.testing.assert_array_equal(s.to_real(), y)
    assert s.norm() == np.max(np.abs(y))


def test_rhs_vanishes_at_joint_critical_point():
    m = flat_model(w0=0.1)  # phi = 0 is critical for V; V_BH is constant
    d = rhs(m, m.charges, minkowski(), 2.0, PhaseState(np.array([0j]), np.array([0j])))
    assert not np.any(d.phi) and not np.any(d.pi)


def test_rhs_flat_hand_assembled():
    w0 = 0.1
    f = GaugeCouplings(1, 1, (((0, 0), Polynomial(1, ((1.0, (0,)), (1j, (1,))))),))
    m = ModelSpec(KahlerModel.flat(1), Polynomial.constant(1, w0), f, Charges((0.0,), (1.0,)))
    r = 1.7
    phi = 0.3 + 0.2j
    pi = -0.1 + 0.05j
    s = abs(phi) ** 2
    dV = w0**2 * np.conj(phi) * math.exp(s) * (s - 2)
    dVbh = 1j / (4 * (1 - phi.imag) ** 2)   # V_BH = -1/(2 Re f), Re f = 1 - Im phi
    expected = -2 / r * pi + np.conj(r**-4 * dVbh + dV)
    d = rhs(m, m.charges, minkowski(), r, PhaseState(np.array([phi]), np.array([pi])))
    assert d.phi[0] == pi
    assert d.pi[0] == pytest.approx(expected, rel=1e-13)


def test_rhs_conjugation_symmetry():
    # real coefficients make phi -> conj(phi) a symmetry; it flips k = Im f, so the
    # dyonic cross term breaks it and the charges are purely electric here
    n = 2
    W = Polynomial(n, ((0.1, (0, 0)), (0.05, (1, 0)), (-0.03, (1, 1))))
    f = GaugeCouplings(1, n, (((0, 0), Polynomial(n, ((1.0, (0, 0)), (0.2, (1, 0)), (0.1, (0, 2))))),))
    m = ModelSpec(KahlerModel(n, "radial_series", (0.0, 1.0, 0.1)), W, f, Charges((0.0,), (1.0,)))
    st_ = PhaseState(np.array([0.2 + 0.1j, -0.1j]), np.array([0.05j, 0.1 - 0.02j]))
    a = rhs(m, m.charges, minkowski(), 1.5, st_.conj())
    b = rhs(m, m.charges, minkowski(), 1.5, st_).conj()
    np.testing.assert_allclose(a.pi, b.pi, atol=1e-15)


def test_contraction_delta_examples():
    assert contraction_delta(2.0, 1.0, 3.0) == 0.2
    assert contraction_delta(1.0, 1.0, 0.0) == 1.0
    vals = [contraction_delta(c, 1.0, 0.5) for c in (1, 10, 100, 1e4)]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))
    with pytest.raises(NonPositive):
        contraction_delta(0.0, 1.0, 1.0)


def test_lipschitz_cm_free_field():
    m = flat_model(w0=0)
    zero = Charges((0.0,), (0.0,))
    cm = lipschitz_CM(m, zero, minkowski(), (1.0, 2.0), 1.0, 300)
    sup_f = 2.0  # F = 2/r on [1, 2]
    assert 0.5 * (sup_f + 1) <= cm <= 2 * (sup_f + 1)


def test_lipschitz_cm_empty_sample():
    m = flat_model(w0=0)
    with pytest.raises(EmptySample):
        lipschitz_CM(m, m.charges, minkowski(), (1.0, 2.0), 0.0, 20)


def test_picard_constant_at_critical_point():
    m = flat_model(w0=0.1)
    prof = picard_solve(m, m.charges, minkowski(), 1.0, PhaseState(np.array([0j]), np.array([0j])))
    assert np.max(np.abs(prof.phi)) == 0 and np.max(np.abs(prof.pi)) == 0


def test_picard_matches_free_field_closed_form():
    m = flat_model(w0=0)
    zero = Charges((0.0,), (0.0,))
    phi0, pi0 = 0.2 + 0.1j, 0.3 - 0.4j
    prof = picard_solve(m, zero, minkowski(), 1.0, PhaseState(np.array([phi0]), np.array([pi0])))
    r = prof.r
    np.testing.assert_allclose(prof.phi[:, 0], phi0 + pi0 * (1 - 1 / r), atol=1e-12)
    np.testing.assert_allclose(prof.pi[:, 0], pi0 / r**2, atol=1e-12)


def test_picard_agrees_with_rk_and_contracts(flat, flat_start):
    prof = picard_solve(flat, flat.charges, minkowski(), 1.0, flat_start)
    assert prof.contraction_factor < 1
    d = np.array(prof.iterate_distances)
    ratios = d[1:] / d[:-1]
    assert np.all(ratios[d[1:] > 1e-13] <= prof.contraction_factor)
    rk = rk_solve(flat, flat.charges, minkowski(), 1.0, flat_start, prof.r[-1], r_eval=prof.r)
    assert sup_distance(prof, rk) <= 1e-8
    # the dense interpolant satisfies the integral equation at off-node radii too
    probe = np.linspace(prof.r[0], prof.r[-1], 7)
    resid = apply_integral_operator(flat, flat.charges, minkowski(), prof, probe) - np.array([prof.y_at(x) for x in probe])
    assert np.max(np.abs(resid)) <= 2e-12


def test_picard_curved_model_agrees_with_rk():
    m = curved_model()
    start = PhaseState(np.array([0.1 - 0.05j, 0.1j]), np.array([0.02j, -0.03]))
    prof = picard_solve(m, m.charges, minkowski(), 1.0, start)
    rk = rk_solve(m, m.charges, minkowski(), 1.0, start, prof.r[-1], r_eval=prof.r)
    assert prof.contraction_factor < 1
    assert sup_distance(prof, rk) <= 1e-8


def test_picard_failures():
    m = flat_model(w0=0.1)
    u0 = PhaseState(np.array([0j]), np.array([0j]))
    with pytest.raises(NoContraction):
        picard_solve(m, m.charges, minkowski(), 1.0, u0, SolverConfig(max_halvings=0))
    start = PhaseState(np.array([0.3 + 0.1j]), np.array([0.05 - 0.02j]))
    with pytest.raises(MaxIters):
        picard_solve(m, m.charges, minkowski(), 1.0, start, SolverConfig(max_picard_iters=2))


def test_picard_chain_covers_interval(flat, flat_start):
    prof = picard_chain(flat, flat.charges, minkowski(), 1.0, flat_start, 2.0)
    assert prof.r[0] == 1.0 and prof.r[-1] == pytest.approx(2.0, abs=1e-14)
    assert len(prof.steps) >= 2
    rk = rk_solve(flat, flat.charges, minkowski(), 1.0, flat_start, prof.r[-1], r_eval=prof.r)
    assert sup_distance(prof, rk) <= 1e-8


def test_rk_constant_solution_and_refinement(flat, flat_start):
    u0 = PhaseState(np.array([0j]), np.array([0j]))
    prof = rk_solve(flat, flat.charges, minkowski(), 1.0, u0, 5.0)
    assert np.max(np.abs(prof.phi)) <= 1e-14
    loose = SolverConfig(rk_rel_tol=1e-10, rk_abs_tol=1e-12)
    tight = SolverConfig(rk_rel_tol=5e-11, rk_abs_tol=5e-13)
    a = rk_solve(flat, flat.charges, minkowski(), 1.0, flat_start, 5.0, loose)
    b = rk_solve(flat, flat.charges, minkowski(), 1.0, flat_start, 5.0, tight)
    end_scale = np.max(np.abs(b.state_at(5.0).to_real()))
    assert np.max(np.abs(a.state_at(5.0).to_real() - b.state_at(5.0).to_real())) <= 10 * 1e-10 * max(1.0, end_scale)


def test_near_horizon_seed_at_attractor_is_static():
    m = attractor_model()
    bg = near_horizon_from_attractor(m, m.charges, np.array([0j]))
    seed = near_horizon_seed(m, m.charges, np.array([0j]), bg.r_h * 1.01, bg)
    assert np.max(np.abs(seed.phi)) == 0 and np.max(np.abs(seed.pi)) == 0


def test_near_horizon_seed_formula():
    f = GaugeCouplings(1, 1, (((0, 0), Polynomial(1, ((1.0, (0,)), (0.03, (1,))))),))
    m = ModelSpec(KahlerModel.flat(1), Polynomial(1, ()), f, Charges((0.0,), (1.0,)))
    phi_h = np.array([0j])
    bg = near_horizon_from_attractor(m, m.charges, phi_h)
    c = effective_potential_grad(m, phi_h, m.charges)[0]
    ell = ell_inverse(-0.5, 0.0)
    for x in (1e-4, 1e-2):
        seed = near_horizon_seed(m, m.charges, phi_h, bg.r_h + x, bg)
        assert seed.phi[0] == pytest.approx(-ell * math.log(x) * np.conj(c), rel=1e-12)
        assert seed.pi[0] == pytest.approx(-ell * np.conj(c) / x, rel=1e-12)


def synthetic(phi0, sigma, r):
    phi = phi0[None, :] + sigma[None, :] / r[:, None]
    pi = -sigma[None, :] / r[:, None] ** 2
    return FlowProfile(r, phi, pi, "RK", float(r[-1] - r[0]))


def test_asymptotic_match_synthetic_round_trip():
    r = np.linspace(5.0, 60.0, 120)
    phi0 = np.array([0.3 - 0.2j, 0.1j])
    sigma = np.array([0.7 + 0.1j, -0.25])
    fit = asymptotic_match(synthetic(phi0, sigma, r), curved_model(), curved_model().charges, minkowski(),
                           include_pq=False)
    np.testing.assert_allclose(fit.sigma, sigma, rtol=1e-10)
    np.testing.assert_allclose(fit.phi0, phi0, rtol=1e-10)


def test_asymptotic_match_constant_profile():
    r = np.linspace(2.0, 30.0, 50)
    fit = asymptotic_match(synthetic(np.array([0.4j]), np.array([0j]), r), flat_model(), flat_model().charges,
                           minkowski())
    assert fit.phi0[0] == pytest.approx(0.4j, abs=1e-12)
    assert abs(fit.sigma[0]) <= 1e-10


def test_asymptotic_match_ill_conditioned():
    r = np.linspace(2.0, 2.0 + 1e-9, 5)
    with pytest.raises(IllConditionedFit):
        asymptotic_match(synthetic(np.array([0.4j]), np.array([0.1]), r), flat_model(), flat_model().charges,
                         minkowski(), include_pq=False)


def test_asymptotic_match_rk_tail():
    m = flat_model(w0=0)
    zero = Charges((0.0,), (0.0,))
    start = PhaseState(np.array([0.1 + 0.2j]), np.array([0.3j]))
    prof = rk_solve(m, zero, minkowski(), 1.0, start, 40.0, samples=400)
    fit = asymptotic_match(prof, m, zero, minkowski(), include_pq=False, r_min=5.0)
    amplitude = np.max(np.abs(prof.phi[prof.r >= 5.0] - fit.phi0))
    assert fit.fit_residual <= 1e-6 * amplitude
    assert fit.sigma[0] == pytest.approx(-0.3j, rel=1e-8)


def test_profile_json_and_csv(flat, flat_start):
    prof = rk_solve(flat, flat.charges, minkowski(), 1.0, flat_start, 2.0, samples=11)
    back = FlowProfile.from_json(prof.to_json())
    np.testing.assert_array_equal(back.phi, prof.phi)
    np.testing.assert_array_equal(back.pi, prof.pi)
    header, rows = prof.csv_rows()
    assert header == ["r", "phi_re_0", "phi_im_0", "pi_re_0", "pi_im_0"]
    assert len(rows) == 11


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(ball_radius=0.0)
    with pytest.raises(ValueError):
        SolverConfig(fixpoint_tol=2.0)
